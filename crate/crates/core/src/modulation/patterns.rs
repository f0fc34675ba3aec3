//! Activation-pattern enumeration and selection.

use itertools::Itertools;
use serde::Serialize;

use super::{fill_vector, squared_distance, Pattern, PatternPolicy, SchemeConfig, TIE_TOLERANCE};
use crate::channel::ChannelMatrix;
use crate::error::{Error, Result};

/// Families up to this many candidates are searched exhaustively.
pub const EXHAUSTIVE_FAMILY_LIMIT: u128 = 1_000_000;

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc = 1u128;
    for i in 0..k {
        match acc.checked_mul((n - i) as u128) {
            Some(v) => acc = v / (i as u128 + 1),
            None => return u128::MAX,
        }
    }
    acc
}

/// All `n_active`-subsets of `0..n_tx` in lexicographic order.
pub fn all_patterns(n_tx: usize, n_active: usize) -> Vec<Pattern> {
    (0..n_tx)
        .combinations(n_active)
        .map(Pattern)
        .collect()
}

fn first_patterns(n_tx: usize, n_active: usize, count: usize) -> Vec<Pattern> {
    (0..n_tx)
        .combinations(n_active)
        .take(count)
        .map(Pattern)
        .collect()
}

pub(super) fn validate_explicit(cfg: &SchemeConfig, list: &[Pattern]) -> Result<()> {
    let field = "scheme.patterns";
    if list.len() != cfg.pattern_count() {
        return Err(Error::validation(
            field,
            format!("expected {} patterns, got {}", cfg.pattern_count(), list.len()),
        ));
    }
    for p in list {
        if p.len() != cfg.n_active {
            return Err(Error::validation(field, format!("{p} must light {} LEDs", cfg.n_active)));
        }
        if p.leds().iter().any(|&l| l >= cfg.n_tx) {
            return Err(Error::validation(field, format!("{p} names an LED beyond {}", cfg.n_tx)));
        }
    }
    if list.iter().duplicates().next().is_some() {
        return Err(Error::validation(field, "duplicate activation patterns"));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchMode {
    /// No choice was made (fixed list, or every pattern is used).
    Fixed,
    Exhaustive,
    Greedy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatternChoice {
    pub patterns: Vec<Pattern>,
    /// Distance metrics of the chosen family when a channel was supplied.
    pub d_min: Option<f64>,
    pub d_avg: Option<f64>,
    pub mode: SearchMode,
}

/// Chooses the activation patterns for `cfg`.
///
/// The `optimized` policy needs the channel; it maximises `d_min` of the
/// induced signal set, then `d_avg`, then picks the lexicographically
/// smallest family.
pub fn select_patterns(cfg: &SchemeConfig, h: Option<&ChannelMatrix>) -> Result<PatternChoice> {
    cfg.validate()?;
    let count = cfg.pattern_count();
    let total = binomial(cfg.n_tx, cfg.n_active);
    let (pool, need_search) = match &cfg.policy {
        PatternPolicy::Explicit(list) => (list.clone(), false),
        _ if total == count as u128 => (all_patterns(cfg.n_tx, cfg.n_active), false),
        PatternPolicy::Lexicographic => (first_patterns(cfg.n_tx, cfg.n_active, count), false),
        PatternPolicy::Optimized => {
            if h.is_none() {
                return Err(Error::Config(
                    "optimized pattern selection needs a channel matrix".into(),
                ));
            }
            (all_patterns(cfg.n_tx, cfg.n_active), true)
        }
    };
    let Some(h) = h else {
        return Ok(PatternChoice {
            patterns: pool,
            d_min: None,
            d_avg: None,
            mode: SearchMode::Fixed,
        });
    };
    let dist = PatternDistances::new(h, cfg, &pool)?;
    let best = dist.best_family(count);
    let mode = if need_search { best.mode } else { SearchMode::Fixed };
    Ok(PatternChoice {
        patterns: best.members.iter().map(|&i| pool[i].clone()).collect(),
        d_min: Some(best.d_min),
        d_avg: Some(best.d_avg),
        mode,
    })
}

/// Result of a family search over a [`PatternDistances`] pool.
#[derive(Debug, Clone, PartialEq)]
pub struct Family {
    /// Indices into the pool, increasing.
    pub members: Vec<usize>,
    pub d_min: f64,
    pub d_avg: f64,
    pub mode: SearchMode,
}

/// Pairwise distance summaries between the image sets of a pool of
/// activation patterns.
///
/// `min[a][b]` is the smallest `‖H(x − x')‖²` with `x` on pattern `a` and
/// `x'` on pattern `b`; on the diagonal it runs over distinct vectors of one
/// pattern (infinite when the pattern carries one vector). `sum[a][b]` is
/// the matching sum of squared distances.
#[derive(Debug, Clone)]
pub struct PatternDistances {
    size: usize,
    per_pattern: usize,
    min: Vec<f64>,
    sum: Vec<f64>,
}

impl PatternDistances {
    pub fn new(h: &ChannelMatrix, cfg: &SchemeConfig, pool: &[Pattern]) -> Result<Self> {
        if h.cols() != cfg.n_tx {
            return Err(Error::Config(format!(
                "channel has {} LEDs but {} expects {}",
                h.cols(),
                cfg.label(),
                cfg.n_tx
            )));
        }
        let nr = h.rows();
        let sym_bits = cfg.symbol_bits();
        let per_pattern = 1usize << (sym_bits * cfg.n_active as u32);
        let levels = cfg.alphabet().levels;
        let size = pool.len();

        let mut images = vec![0.0; size * per_pattern * nr];
        let mut x = vec![0.0; cfg.n_tx];
        for (p_idx, p) in pool.iter().enumerate() {
            for s in 0..per_pattern {
                x.iter_mut().for_each(|v| *v = 0.0);
                fill_vector(&mut x, p, s, sym_bits, &levels);
                let k = p_idx * per_pattern + s;
                h.apply_into(&x, &mut images[k * nr..(k + 1) * nr]);
            }
        }
        let block = per_pattern * nr;
        let mut min = vec![f64::INFINITY; size * size];
        let mut sum = vec![0.0; size * size];
        for a in 0..size {
            let ia = &images[a * block..(a + 1) * block];
            for b in a..size {
                let ib = &images[b * block..(b + 1) * block];
                let (mut lo, mut acc) = (f64::INFINITY, 0.0);
                for (s, ya) in ia.chunks_exact(nr).enumerate() {
                    let from = if a == b { s + 1 } else { 0 };
                    for yb in ib.chunks_exact(nr).skip(from) {
                        let d = squared_distance(ya, yb);
                        lo = lo.min(d);
                        acc += d;
                    }
                }
                for (i, j) in [(a, b), (b, a)] {
                    min[i * size + j] = lo;
                    sum[i * size + j] = acc;
                }
            }
        }
        Ok(Self {
            size,
            per_pattern,
            min,
            sum,
        })
    }

    pub fn len(&self) -> usize {
        self.size
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0
    }

    fn min_at(&self, a: usize, b: usize) -> f64 {
        self.min[a * self.size + b]
    }

    fn sum_at(&self, a: usize, b: usize) -> f64 {
        self.sum[a * self.size + b]
    }

    fn pair_count(&self, family_size: usize) -> f64 {
        let n = (family_size * self.per_pattern) as f64;
        n * (n - 1.0) / 2.0
    }

    /// `(d_min, d_avg)` of the signal set spanned by `members`.
    pub fn family_metrics(&self, members: &[usize]) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut acc = 0.0;
        for (i, &a) in members.iter().enumerate() {
            for &b in &members[i..] {
                lo = lo.min(self.min_at(a, b));
                acc += self.sum_at(a, b);
            }
        }
        (lo, acc / self.pair_count(members.len()))
    }

    /// Best family of `count` pool entries.
    pub fn best_family(&self, count: usize) -> Family {
        assert!(count >= 1 && count <= self.size, "family size out of range");
        if count == self.size {
            let members: Vec<usize> = (0..count).collect();
            let (d_min, d_avg) = self.family_metrics(&members);
            return Family {
                members,
                d_min,
                d_avg,
                mode: SearchMode::Fixed,
            };
        }
        if binomial(self.size, count) > EXHAUSTIVE_FAMILY_LIMIT {
            return self.greedy(count);
        }
        if 2 * count > self.size {
            return self.best_by_complement(count);
        }
        let greedy = self.greedy(count);
        let mut search = Exhaustive::new(self, count);
        let best_min = search.max_min(greedy.d_min);
        let threshold = lower(best_min);
        let best_sum = search.max_sum(threshold);
        let members = search.first_at_least(threshold, lower(best_sum));
        let (d_min, d_avg) = self.family_metrics(&members);
        Family {
            members,
            d_min,
            d_avg,
            mode: SearchMode::Exhaustive,
        }
    }

    /// Exhaustive search over the patterns left out, for families that
    /// keep most of the pool.
    fn best_by_complement(&self, count: usize) -> Family {
        let n = self.size;
        let mut pairs: Vec<(f64, usize, usize)> = (0..n)
            .flat_map(|a| (a..n).map(move |b| (a, b)))
            .map(|(a, b)| (self.min_at(a, b), a, b))
            .collect();
        pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
        let row: Vec<f64> = (0..n).map(|a| (0..n).map(|b| self.sum_at(a, b)).sum()).collect();
        let total: f64 = (0..n).map(|a| (a..n).map(|b| self.sum_at(a, b)).sum::<f64>()).sum();

        let mut removed = vec![false; n];
        let scored: Vec<(Vec<usize>, f64, f64)> = (0..n)
            .combinations(n - count)
            .map(|out| {
                out.iter().for_each(|&o| removed[o] = true);
                let d_min = pairs
                    .iter()
                    .find(|&&(_, a, b)| !removed[a] && !removed[b])
                    .map_or(f64::INFINITY, |p| p.0);
                let mut sum = total;
                for (i, &a) in out.iter().enumerate() {
                    sum -= row[a];
                    for &b in &out[i + 1..] {
                        sum += self.sum_at(a, b);
                    }
                }
                out.iter().for_each(|&o| removed[o] = false);
                (out, d_min, sum)
            })
            .collect();

        let best_min = scored.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
        let best_sum = scored
            .iter()
            .filter(|s| s.1 >= lower(best_min))
            .map(|s| s.2)
            .fold(f64::NEG_INFINITY, f64::max);
        let members = scored
            .iter()
            .filter(|s| s.1 >= lower(best_min) && s.2 >= lower(best_sum))
            .map(|(out, _, _)| (0..n).filter(|i| !out.contains(i)).collect::<Vec<_>>())
            .min()
            .expect("at least one family");
        let (d_min, d_avg) = self.family_metrics(&members);
        Family {
            members,
            d_min,
            d_avg,
            mode: SearchMode::Exhaustive,
        }
    }

    /// Grows a family from the best-separated pair by repeatedly adding the
    /// pattern that keeps the running `d_min` largest.
    fn greedy(&self, count: usize) -> Family {
        let n = self.size;
        let mut chosen: Vec<usize> = Vec::with_capacity(count);
        if count == 1 {
            let best = (0..n)
                .reduce(|a, b| {
                    if better((self.min_at(b, b), self.sum_at(b, b)), (self.min_at(a, a), self.sum_at(a, a))) {
                        b
                    } else {
                        a
                    }
                })
                .unwrap_or(0);
            chosen.push(best);
        } else {
            let mut best: Option<((f64, f64), (usize, usize))> = None;
            for a in 0..n {
                for b in a + 1..n {
                    let key = (
                        self.min_at(a, b).min(self.min_at(a, a)).min(self.min_at(b, b)),
                        self.sum_at(a, b) + self.sum_at(a, a) + self.sum_at(b, b),
                    );
                    if best.is_none_or(|(k, _)| better(key, k)) {
                        best = Some((key, (a, b)));
                    }
                }
            }
            let (_, (a, b)) = best.expect("pool holds at least two patterns");
            chosen.extend([a, b]);
        }
        let mut in_set = vec![false; n];
        let mut min_to = vec![f64::INFINITY; n];
        let mut sum_to = vec![0.0; n];
        let mut run_min = f64::INFINITY;
        for &c in &chosen {
            in_set[c] = true;
        }
        for (i, &a) in chosen.iter().enumerate() {
            run_min = run_min.min(self.min_at(a, a));
            for &b in &chosen[i + 1..] {
                run_min = run_min.min(self.min_at(a, b));
            }
        }
        for c in 0..n {
            for &a in &chosen {
                min_to[c] = min_to[c].min(self.min_at(a, c));
                sum_to[c] += self.sum_at(a, c);
            }
        }
        while chosen.len() < count {
            let mut pick: Option<((f64, f64), usize)> = None;
            for c in (0..n).filter(|&c| !in_set[c]) {
                let key = (
                    run_min.min(min_to[c]).min(self.min_at(c, c)),
                    sum_to[c] + self.sum_at(c, c),
                );
                if pick.is_none_or(|(k, _)| better(key, k)) {
                    pick = Some((key, c));
                }
            }
            let ((m, _), c) = pick.expect("pool larger than family");
            run_min = m;
            in_set[c] = true;
            chosen.push(c);
            for o in 0..n {
                min_to[o] = min_to[o].min(self.min_at(c, o));
                sum_to[o] += self.sum_at(c, o);
            }
        }
        chosen.sort_unstable();
        let (d_min, d_avg) = self.family_metrics(&chosen);
        Family {
            members: chosen,
            d_min,
            d_avg,
            mode: SearchMode::Greedy,
        }
    }
}

fn lower(v: f64) -> f64 {
    v - v.abs() * TIE_TOLERANCE
}

/// `a` beats `b` on `(d_min, distance sum)` with tolerant comparison.
fn better(a: (f64, f64), b: (f64, f64)) -> bool {
    if a.0 > b.0 + b.0.abs() * TIE_TOLERANCE {
        return true;
    }
    a.0 >= lower(b.0) && a.1 > b.1 + b.1.abs() * TIE_TOLERANCE
}

/// Depth-first enumeration of families in lexicographic order with pruning
/// on the running minimum distance.
struct Exhaustive<'a> {
    d: &'a PatternDistances,
    count: usize,
    chosen: Vec<usize>,
}

impl<'a> Exhaustive<'a> {
    fn new(d: &'a PatternDistances, count: usize) -> Self {
        Self {
            d,
            count,
            chosen: Vec::with_capacity(count),
        }
    }

    fn extend_min(&self, run_min: f64, c: usize) -> f64 {
        self.chosen
            .iter()
            .fold(run_min.min(self.d.min_at(c, c)), |m, &a| m.min(self.d.min_at(a, c)))
    }

    fn extend_sum(&self, run_sum: f64, c: usize) -> f64 {
        self.chosen
            .iter()
            .fold(run_sum + self.d.sum_at(c, c), |s, &a| s + self.d.sum_at(a, c))
    }

    fn last_start(&self) -> usize {
        self.d.size - (self.count - self.chosen.len())
    }

    /// Largest achievable `d_min`, seeded with a known feasible value.
    fn max_min(&mut self, seed: f64) -> f64 {
        let mut best = seed;
        self.max_min_rec(0, f64::INFINITY, &mut best);
        best
    }

    fn max_min_rec(&mut self, start: usize, run_min: f64, best: &mut f64) {
        for c in start..=self.last_start() {
            let m = self.extend_min(run_min, c);
            if m <= *best {
                continue;
            }
            if self.chosen.len() + 1 == self.count {
                *best = m;
                continue;
            }
            self.chosen.push(c);
            self.max_min_rec(c + 1, m, best);
            self.chosen.pop();
        }
    }

    fn max_sum(&mut self, threshold: f64) -> f64 {
        let mut best = f64::NEG_INFINITY;
        self.max_sum_rec(0, f64::INFINITY, 0.0, threshold, &mut best);
        best
    }

    fn max_sum_rec(&mut self, start: usize, run_min: f64, run_sum: f64, threshold: f64, best: &mut f64) {
        for c in start..=self.last_start() {
            let m = self.extend_min(run_min, c);
            if m < threshold {
                continue;
            }
            let s = self.extend_sum(run_sum, c);
            if self.chosen.len() + 1 == self.count {
                *best = best.max(s);
                continue;
            }
            self.chosen.push(c);
            self.max_sum_rec(c + 1, m, s, threshold, best);
            self.chosen.pop();
        }
    }

    fn first_at_least(&mut self, threshold: f64, sum_floor: f64) -> Vec<usize> {
        self.chosen.clear();
        let found = self.first_rec(0, f64::INFINITY, 0.0, threshold, sum_floor);
        assert!(found, "a family reaching the optimum must exist");
        std::mem::take(&mut self.chosen)
    }

    fn first_rec(&mut self, start: usize, run_min: f64, run_sum: f64, threshold: f64, sum_floor: f64) -> bool {
        for c in start..=self.last_start() {
            let m = self.extend_min(run_min, c);
            if m < threshold {
                continue;
            }
            let s = self.extend_sum(run_sum, c);
            self.chosen.push(c);
            if self.chosen.len() == self.count {
                if s >= sum_floor {
                    return true;
                }
            } else if self.first_rec(c + 1, m, s, threshold, sum_floor) {
                return true;
            }
            self.chosen.pop();
        }
        false
    }
}
