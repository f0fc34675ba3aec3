//! Exhaustive search for LED placements on a grid.
//!
//! Every `N_t`-subset of grid cells is scored by the `d_min` of the signal
//! set it induces, then by `d_avg`; the pattern policy of the scheme is
//! applied to each candidate's own channel. Remaining ties (within
//! [`TIE_TOLERANCE`]) go to the lexicographically smallest cell set.

use itertools::Itertools;
use rayon::prelude::*;

use crate::channel::ChannelMatrix;
use crate::error::{Error, Result};
use crate::modulation::{
    binomial, efficiency, select_patterns, Pattern, PatternChoice, PatternDistances, PatternPolicy,
    SchemeConfig, SearchMode, TIE_TOLERANCE,
};
use crate::system::LinkGeometry;

/// Largest number of placements evaluated in one search.
pub const PLACEMENT_BUDGET: u128 = 1_000_000;

/// Number of runner-up placements kept in a result.
pub const RUNNERS_UP: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct PlacementCandidate {
    /// Occupied cells, zero-based row-major, increasing.
    pub cells: Vec<usize>,
    pub channel: ChannelMatrix,
    pub d_min: f64,
    pub d_avg: f64,
}

#[derive(Debug, Clone)]
pub struct PlacementResult {
    pub best: PlacementCandidate,
    /// Activation patterns used with the best placement.
    pub patterns: Vec<Pattern>,
    /// How the pattern family of the best placement was chosen.
    pub pattern_mode: SearchMode,
    /// Best placements other than `best`, in decreasing order.
    pub runners_up: Vec<PlacementCandidate>,
    /// Images of the best cell set under the grid's symmetries.
    pub orbit: Vec<Vec<usize>>,
    pub evaluated: usize,
}

struct Score {
    d_min: f64,
    d_avg: f64,
    mode: SearchMode,
    members: Vec<usize>,
}

/// Best placement of `scheme`'s LEDs on `geometry.tx_grid`.
pub fn optimize_placement(geometry: &LinkGeometry, scheme: &SchemeConfig) -> Result<PlacementResult> {
    scheme.validate()?;
    let grid = geometry.grid_channel()?;
    let cells = grid.cols();
    if scheme.n_tx > cells {
        return Err(Error::Config(format!(
            "{} LEDs do not fit a {cells}-cell grid",
            scheme.n_tx
        )));
    }
    if cells > 64 {
        return Err(Error::Budget("placement search supports grids of at most 64 cells".into()));
    }
    let total = binomial(cells, scheme.n_tx);
    if total > PLACEMENT_BUDGET {
        return Err(Error::Budget(format!(
            "{total} placements exceed the budget of {PLACEMENT_BUDGET}; use a smaller grid"
        )));
    }
    let candidates: Vec<u64> = (0..cells)
        .combinations(scheme.n_tx)
        .map(|c| c.iter().fold(0u64, |m, &i| m | 1 << i))
        .collect();

    // Pool and family size are the same for every placement.
    let count = scheme.pattern_count();
    let pool: Vec<Pattern> = match scheme.policy {
        PatternPolicy::Optimized => crate::modulation::all_patterns(scheme.n_tx, scheme.n_active),
        _ => select_patterns(scheme, None)?.patterns,
    };

    let scores: Vec<Score> = candidates
        .par_iter()
        .map(|&mask| {
            let h = grid.select_columns(&mask_cells(mask));
            let dist = PatternDistances::new(&h, scheme, &pool).expect("dimensions agree");
            let fam = dist.best_family(count);
            Score {
                d_min: fam.d_min,
                d_avg: fam.d_avg,
                mode: fam.mode,
                members: fam.members,
            }
        })
        .collect();

    let best_min = scores.iter().map(|s| s.d_min).fold(f64::NEG_INFINITY, f64::max);
    let best_avg = scores
        .iter()
        .filter(|s| s.d_min >= lower(best_min))
        .map(|s| s.d_avg)
        .fold(f64::NEG_INFINITY, f64::max);
    // candidates are in lexicographic order, so the first hit is the smallest
    let winner = scores
        .iter()
        .position(|s| s.d_min >= lower(best_min) && s.d_avg >= lower(best_avg))
        .expect("at least one placement");

    let mut order: Vec<usize> = (0..scores.len()).filter(|&i| i != winner).collect();
    order.sort_by(|&a, &b| {
        let (sa, sb) = (&scores[a], &scores[b]);
        sb.d_min
            .total_cmp(&sa.d_min)
            .then(sb.d_avg.total_cmp(&sa.d_avg))
            .then(a.cmp(&b))
    });
    let candidate = |i: usize| {
        let cells = mask_cells(candidates[i]);
        PlacementCandidate {
            channel: grid.select_columns(&cells),
            cells,
            d_min: scores[i].d_min,
            d_avg: scores[i].d_avg,
        }
    };
    let best = candidate(winner);
    let patterns = scores[winner].members.iter().map(|&m| pool[m].clone()).collect();
    let orbit = orbit(&best.cells, geometry.tx_grid.rows, geometry.tx_grid.cols);
    Ok(PlacementResult {
        patterns,
        pattern_mode: if matches!(scheme.policy, PatternPolicy::Optimized) {
            scores[winner].mode
        } else {
            SearchMode::Fixed
        },
        runners_up: order.into_iter().take(RUNNERS_UP).map(candidate).collect(),
        orbit,
        evaluated: scores.len(),
        best,
    })
}

fn lower(v: f64) -> f64 {
    v - v.abs() * TIE_TOLERANCE
}

fn mask_cells(mask: u64) -> Vec<usize> {
    (0..64).filter(|i| mask >> i & 1 == 1).collect()
}

/// Distance metrics of a fixed placement under the scheme's pattern policy.
pub fn evaluate_placement(
    geometry: &LinkGeometry,
    scheme: &SchemeConfig,
    cells: &[usize],
) -> Result<(PlacementCandidate, PatternChoice)> {
    let grid = geometry.grid_channel()?;
    crate::system::check_cells(cells, scheme.n_tx, grid.cols())?;
    let channel = grid.select_columns(cells);
    let choice = select_patterns(scheme, Some(&channel))?;
    Ok((
        PlacementCandidate {
            cells: cells.to_vec(),
            d_min: choice.d_min.unwrap_or(f64::NAN),
            d_avg: choice.d_avg.unwrap_or(f64::NAN),
            channel,
        },
        choice,
    ))
}

/// Cell permutations realising the symmetries of a `rows × cols` grid:
/// the dihedral group of order 8 for square grids, 4 otherwise.
pub fn grid_symmetries(rows: usize, cols: usize) -> Vec<Vec<usize>> {
    let map = |f: &dyn Fn(usize, usize) -> (usize, usize)| -> Vec<usize> {
        (0..rows * cols)
            .map(|i| {
                let (r, c) = f(i / cols, i % cols);
                r * cols + c
            })
            .collect()
    };
    let (rm, cm) = (rows - 1, cols - 1);
    let mut ops: Vec<Vec<usize>> = vec![
        map(&|r, c| (r, c)),
        map(&|r, c| (r, cm - c)),
        map(&|r, c| (rm - r, c)),
        map(&|r, c| (rm - r, cm - c)),
    ];
    if rows == cols {
        ops.push(map(&|r, c| (c, r)));
        ops.push(map(&|r, c| (cm - c, rm - r)));
        ops.push(map(&|r, c| (c, rm - r)));
        ops.push(map(&|r, c| (cm - c, r)));
    }
    ops
}

/// Distinct images of `cells` under the grid symmetries, sorted.
pub fn orbit(cells: &[usize], rows: usize, cols: usize) -> Vec<Vec<usize>> {
    grid_symmetries(rows, cols)
        .iter()
        .map(|perm| {
            let mut img: Vec<usize> = cells.iter().map(|&c| perm[c]).collect();
            img.sort_unstable();
            img
        })
        .sorted()
        .dedup()
        .collect()
}

/// Grid picture of a placement, first grid row first: `×` marks an LED,
/// `○` an empty cell.
pub fn grid_art(cells: &[usize], rows: usize, cols: usize) -> String {
    let mut out = String::new();
    for r in 0..rows {
        let line: Vec<&str> = (0..cols)
            .map(|c| if cells.contains(&(r * cols + c)) { "×" } else { "○" })
            .collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone)]
pub struct RankRow {
    pub scheme: SchemeConfig,
    pub efficiency: u32,
    pub cells: Vec<usize>,
    pub patterns: Vec<Pattern>,
    pub pattern_mode: SearchMode,
    pub d_min: f64,
    pub d_avg: f64,
}

#[derive(Debug, Clone)]
pub struct RankTable {
    pub rows: Vec<RankRow>,
    /// Set when the compared schemes do not share one efficiency.
    pub mixed_efficiency: bool,
}

/// Optimal placement and distance metrics for each scheme.
pub fn rank_configs(configs: &[SchemeConfig], geometry: &LinkGeometry) -> Result<RankTable> {
    let mut rows = Vec::with_capacity(configs.len());
    for cfg in configs {
        let eta = efficiency(cfg)?;
        let res = optimize_placement(geometry, cfg)?;
        rows.push(RankRow {
            scheme: cfg.clone(),
            efficiency: eta,
            cells: res.best.cells,
            patterns: res.patterns,
            pattern_mode: res.pattern_mode,
            d_min: res.best.d_min,
            d_avg: res.best.d_avg,
        });
    }
    let mixed_efficiency = rows.windows(2).any(|w| w[0].efficiency != w[1].efficiency);
    Ok(RankTable {
        rows,
        mixed_efficiency,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modulation::{build_signal_set, d_avg, d_min};
    use rand::seq::IndexedRandom;
    use rand::SeedableRng;

    fn small_geometry() -> LinkGeometry {
        LinkGeometry::with_tx_grid(3, 3, 0.6)
    }

    #[test]
    fn full_grid_has_single_candidate() {
        let g = LinkGeometry::with_tx_grid(2, 2, 0.6);
        let res = optimize_placement(&g, &SchemeConfig::ssk(4)).unwrap();
        assert_eq!(res.evaluated, 1);
        assert_eq!(res.best.cells, vec![0, 1, 2, 3]);
        assert!(res.runners_up.is_empty());
    }

    #[test]
    fn best_dominates_random_placements() {
        let g = small_geometry();
        let scheme = SchemeConfig::gsm(4, 2, 2).with_policy(PatternPolicy::Optimized);
        let res = optimize_placement(&g, &scheme).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let cells: Vec<usize> = (0..9).collect();
        for _ in 0..100 {
            let mut pick: Vec<usize> = cells.choose_multiple(&mut rng, 4).copied().collect();
            pick.sort_unstable();
            let (cand, _) = evaluate_placement(&g, &scheme, &pick).unwrap();
            assert!(res.best.d_min >= cand.d_min * (1.0 - 1e-9));
        }
    }

    #[test]
    fn reported_metrics_match_signal_set() {
        let g = small_geometry();
        let scheme = SchemeConfig::gsm(4, 2, 2);
        let res = optimize_placement(&g, &scheme).unwrap();
        let set = build_signal_set(&scheme, &res.patterns).unwrap();
        let dm = d_min(&res.best.channel, &set).unwrap();
        let da = d_avg(&res.best.channel, &set).unwrap();
        assert!((dm - res.best.d_min).abs() <= 1e-12 * dm);
        assert!((da - res.best.d_avg).abs() <= 1e-12 * da);
        for r in &res.runners_up {
            assert!(r.d_min <= res.best.d_min * (1.0 + 1e-9));
        }
    }

    #[test]
    fn rotated_placements_score_the_same() {
        let g = LinkGeometry::default();
        let scheme = SchemeConfig::gsm(4, 2, 2).with_policy(PatternPolicy::Optimized);
        let cells = vec![0, 5, 7, 14];
        let rot = &grid_symmetries(4, 4)[6];
        let mut turned: Vec<usize> = cells.iter().map(|&c| rot[c]).collect();
        turned.sort_unstable();
        assert_ne!(turned, cells);
        let (a, _) = evaluate_placement(&g, &scheme, &cells).unwrap();
        let (b, _) = evaluate_placement(&g, &scheme, &turned).unwrap();
        assert!((a.d_min - b.d_min).abs() <= 1e-9 * a.d_min);
        assert!((a.d_avg - b.d_avg).abs() <= 1e-9 * a.d_avg);
    }

    #[test]
    fn symmetry_groups() {
        let sq = grid_symmetries(4, 4);
        assert_eq!(sq.len(), 8);
        for p in &sq {
            let mut s = p.clone();
            s.sort_unstable();
            assert_eq!(s, (0..16).collect::<Vec<_>>());
        }
        assert_eq!(grid_symmetries(2, 3).len(), 4);
        let corners = orbit(&[0, 3, 12, 15], 4, 4);
        assert_eq!(corners, vec![vec![0, 3, 12, 15]]);
        assert_eq!(orbit(&[0], 4, 4).len(), 4);
    }

    #[test]
    fn optimal_set_is_closed_under_symmetry() {
        let g = small_geometry();
        let scheme = SchemeConfig::gsm(3, 2, 2).with_policy(PatternPolicy::Optimized);
        let res = optimize_placement(&g, &scheme).unwrap();
        for img in &res.orbit {
            let (c, _) = evaluate_placement(&g, &scheme, img).unwrap();
            assert!(c.d_min >= res.best.d_min * (1.0 - 1e-9), "{img:?}");
        }
    }

    #[test]
    fn art_marks_leds() {
        assert_eq!(grid_art(&[0, 3], 2, 2), "× ○\n○ ×\n");
    }

    #[test]
    fn rank_rows() {
        let g = small_geometry();
        let one = rank_configs(&[SchemeConfig::gsm(4, 2, 2)], &g).unwrap();
        assert_eq!(one.rows.len(), 1);
        let two = rank_configs(&[SchemeConfig::gsm(4, 2, 2), SchemeConfig::gsm(4, 2, 2)], &g).unwrap();
        assert_eq!(two.rows[0].cells, two.rows[1].cells);
        assert_eq!(two.rows[0].d_min, two.rows[1].d_min);
        assert!(!two.mixed_efficiency);
        let mixed = rank_configs(&[SchemeConfig::gsm(4, 2, 2), SchemeConfig::ssk(8)], &g).unwrap();
        assert!(mixed.mixed_efficiency);
    }

    #[test]
    fn budget_is_enforced() {
        let g = LinkGeometry::with_tx_grid(6, 6, 0.4);
        let scheme = SchemeConfig::gsm(10, 2, 2);
        assert!(matches!(optimize_placement(&g, &scheme), Err(Error::Budget(_))));
    }
}
