//! Ready-made experiments for the reference indoor link.
//!
//! Every preset pins the parameters that the reference geometry leaves
//! open (detector area 1 cm², `I_p = 1`, seed 42, the default stopping
//! rule). Schemes with fewer LEDs than grid cells use their own optimal
//! placement unless noted; a few baselines reuse the placement found for
//! GSM(4,2,8), written `A` below.
//!
//! | preset | contents |
//! |--------|----------|
//! | `fig5` | bound against simulation for GSM(6,2,2) and GSM(7,2,4) |
//! | `fig6` | four 8-bit GSM configurations |
//! | `fig7` | GSM(4,2,8) on a 2×2 array against LED spacing |
//! | `fig8` | GSM(4,2,16) on a 2×2 array against semiangle, FOV 45° |
//! | `fig11` | SMP, SSK, GSSK, SM and GSM at 4 bits per use |
//! | `fig12` | SMP, GSSK, SM and GSM at 8 bits per use |
//! | `fig13` | SM(4,1,256) and GSM(4,2,16) on `A`, semiangle 15°, FOV 45° |
//! | `table2` | distance metrics of the four 8-bit GSM configurations |

use std::path::Path;

use crate::config::{slug, ExperimentConfig, PatternSetting, PlacementSetting, SweepSetting};
use crate::error::{Error, Result};
use crate::modulation::{PatternPolicy, SchemeConfig};
use crate::placement::{optimize_placement, rank_configs, RankTable};
use crate::runner::{
    build_link, create_file, ensure_dir, mode_name, run_experiment, sci, write_experiment, Manifest, ManifestRun,
};
use crate::simulation::StoppingRule;
use crate::system::LinkGeometry;

pub const PRESETS: [&str; 8] = ["fig5", "fig6", "fig7", "fig8", "fig11", "fig12", "fig13", "table2"];

#[derive(Debug, Clone)]
pub struct Preset {
    pub name: &'static str,
    pub configs: Vec<ExperimentConfig>,
}

fn grid(start: f64, stop: f64, step: f64) -> Vec<f64> {
    let n = ((stop - start) / step).round() as usize;
    (0..=n).map(|i| start + step * i as f64).collect()
}

fn optimized(s: SchemeConfig) -> SchemeConfig {
    s.with_policy(PatternPolicy::Optimized)
}

/// The four 8-bit GSM configurations, in system order.
pub fn eight_bit_systems() -> [SchemeConfig; 4] {
    [
        optimized(SchemeConfig::gsm(4, 2, 8)),
        optimized(SchemeConfig::gsm(7, 2, 4)),
        optimized(SchemeConfig::gsm(7, 3, 2)),
        optimized(SchemeConfig::gsm(12, 2, 2)),
    ]
}

/// Optimal cells of GSM(4,2,8) on the reference grid (zero-based).
pub fn reference_cells() -> Result<Vec<usize>> {
    let res = optimize_placement(&LinkGeometry::default(), &eight_bit_systems()[0])?;
    Ok(res.best.cells)
}

fn curve(scheme: SchemeConfig, snr: &[f64]) -> ExperimentConfig {
    let mut c = ExperimentConfig::with_scheme(&scheme);
    c.sweep.snr_db = snr.to_vec();
    c.output.name = slug(&scheme);
    if scheme.n_tx == 16 {
        c.transmitter.placement = PlacementSetting::Keyword("full".into());
    }
    c
}

fn on_reference(scheme: SchemeConfig, snr: &[f64], cells: &[usize]) -> ExperimentConfig {
    curve(scheme, snr).with_cells(cells)
}

pub fn preset(name: &str) -> Result<Preset> {
    let name = PRESETS
        .iter()
        .copied()
        .find(|p| *p == name)
        .ok_or_else(|| Error::Config(format!("unknown preset {name:?}; expected one of {}", PRESETS.join(", "))))?;
    let configs = match name {
        "fig5" => {
            let snr = grid(10.0, 56.0, 2.0);
            vec![
                curve(optimized(SchemeConfig::gsm(6, 2, 2)), &snr),
                curve(optimized(SchemeConfig::gsm(7, 2, 4)), &snr),
            ]
        }
        "fig6" | "table2" => {
            let snr = grid(20.0, 70.0, 2.5);
            eight_bit_systems().into_iter().map(|s| curve(s, &snr)).collect()
        }
        "fig7" => {
            let mut c = curve(optimized(SchemeConfig::gsm(4, 2, 8)), &[40.0, 60.0, 75.0]);
            c.transmitter.rows = 2;
            c.transmitter.cols = 2;
            c.transmitter.placement = PlacementSetting::Keyword("full".into());
            c.sweep.parameter = Some(SweepSetting::TxSpacing);
            c.sweep.values = grid(0.2, 2.0, 0.2).into_iter().map(|v| (v * 10.0).round() / 10.0).collect();
            vec![c]
        }
        "fig8" => {
            let mut c = curve(optimized(SchemeConfig::gsm(4, 2, 16)), &[45.0, 60.0]);
            c.transmitter.rows = 2;
            c.transmitter.cols = 2;
            c.transmitter.placement = PlacementSetting::Keyword("full".into());
            c.receiver.fov = 45.0;
            c.sweep.parameter = Some(SweepSetting::Semiangle);
            c.sweep.values = grid(15.0, 60.0, 5.0);
            vec![c]
        }
        "fig11" => {
            let cells = reference_cells()?;
            let snr = grid(10.0, 50.0, 2.0);
            vec![
                on_reference(SchemeConfig::smp(4, 2), &snr, &cells),
                curve(SchemeConfig::ssk(16), &snr),
                curve(optimized(SchemeConfig::gssk(7, 2)), &snr),
                on_reference(SchemeConfig::sm(4, 4), &snr, &cells),
                curve(optimized(SchemeConfig::gsm(6, 2, 2).with_index_bits(2)), &snr),
            ]
        }
        "fig12" => {
            let cells = reference_cells()?;
            let snr = grid(20.0, 70.0, 2.0);
            vec![
                on_reference(SchemeConfig::smp(4, 4), &snr, &cells),
                curve(optimized(SchemeConfig::gssk(13, 3)), &snr),
                curve(SchemeConfig::sm(16, 16), &snr),
                curve(optimized(SchemeConfig::gsm(7, 2, 4)), &snr),
            ]
        }
        "fig13" => {
            let cells = reference_cells()?;
            let snr = grid(30.0, 80.0, 2.5);
            [SchemeConfig::sm(4, 256), optimized(SchemeConfig::gsm(4, 2, 16))]
                .into_iter()
                .map(|s| {
                    let mut c = on_reference(s, &snr, &cells);
                    c.transmitter.semiangle = 15.0;
                    c.receiver.fov = 45.0;
                    c
                })
                .collect()
        }
        _ => unreachable!("preset names are checked above"),
    };
    Ok(Preset { name, configs })
}

#[derive(Debug, Clone, Copy, Default)]
pub struct PresetOptions {
    pub seed: Option<u64>,
    pub stopping: Option<StoppingRule>,
}

impl Preset {
    /// Configurations with the option overrides applied.
    pub fn configured(&self, opts: &PresetOptions) -> Vec<ExperimentConfig> {
        self.configs
            .iter()
            .cloned()
            .map(|mut c| {
                if let Some(seed) = opts.seed {
                    c.sim.seed = seed;
                }
                if let Some(s) = opts.stopping {
                    c.sim.min_bit_errors = s.min_bit_errors;
                    c.sim.max_channel_uses = s.max_channel_uses;
                }
                c
            })
            .collect()
    }
}

/// Runs a preset, writing `<preset>_<name>.csv` files and
/// `<preset>_manifest.json` into `out`.
pub fn run_preset(name: &str, out: &Path, opts: &PresetOptions) -> Result<Manifest> {
    let preset = preset(name)?;
    let dir = ensure_dir(out)?;
    let configs = preset.configured(opts);
    let seed = configs.first().map_or(crate::config::DEFAULT_SEED, |c| c.sim.seed);
    let mut manifest = Manifest::new(&format!("preset {name}"), seed);
    let prefix = format!("{name}_");
    if name == "table2" {
        let schemes: Vec<SchemeConfig> = configs.iter().map(|c| c.scheme_config()).collect::<Result<_>>()?;
        let table = rank_configs(&schemes, &configs[0].geometry()?)?;
        let file = format!("{prefix}rank.csv");
        let rows = write_rank_csv(create_file(&dir.join(&file))?, &table)?;
        for (cfg, row) in configs.iter().zip(&table.rows) {
            let mut pinned = cfg.clone().with_cells(&row.cells);
            pinned.scheme.patterns = PatternSetting::List(row.patterns.iter().map(|p| p.one_based()).collect());
            let link = build_link(&pinned)?;
            let mut run = ManifestRun::new(&cfg.name(), &pinned, &link)?;
            run.pattern_search = mode_name(row.pattern_mode);
            manifest.runs.push(run);
        }
        manifest.record(&dir, &file, rows)?;
    } else {
        for cfg in &configs {
            let exp = run_experiment(cfg)?;
            write_experiment(&dir, &prefix, &exp, &mut manifest)?;
        }
    }
    manifest.write(&dir.join(format!("{prefix}manifest.json")))?;
    Ok(manifest)
}

pub fn write_rank_csv<W: std::io::Write>(out: W, table: &RankTable) -> Result<usize> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["system", "config", "eta", "cells", "patterns", "pattern_search", "d_min", "d_avg"])?;
    for (i, r) in table.rows.iter().enumerate() {
        let cells: Vec<String> = r.cells.iter().map(|c| (c + 1).to_string()).collect();
        let patterns: Vec<String> = r.patterns.iter().map(|p| p.to_string()).collect();
        w.write_record([
            (i + 1).to_string(),
            r.scheme.label(),
            r.efficiency.to_string(),
            cells.join(" "),
            patterns.join(" "),
            mode_name(r.pattern_mode),
            sci(r.d_min),
            sci(r.d_avg),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(table.rows.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_is_valid() {
        for name in PRESETS {
            let p = preset(name).unwrap();
            assert!(!p.configs.is_empty(), "{name}");
            for c in &p.configs {
                c.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
            }
            let names: Vec<String> = p.configs.iter().map(|c| c.name()).collect();
            let mut dedup = names.clone();
            dedup.sort();
            dedup.dedup();
            assert_eq!(dedup.len(), names.len(), "{name}: duplicate curve names");
        }
        assert!(preset("fig99").is_err());
    }

    #[test]
    fn scheme_lists() {
        let labels = |n: &str| -> Vec<String> {
            preset(n)
                .unwrap()
                .configs
                .iter()
                .map(|c| c.scheme_config().unwrap().label())
                .collect()
        };
        assert_eq!(labels("fig12"), ["SMP(4,4,4)", "GSSK(13,3,1)", "SM(16,1,16)", "GSM(7,2,4)"]);
        assert_eq!(labels("fig13"), ["SM(4,1,256)", "GSM(4,2,16)"]);
        assert_eq!(labels("table2").len(), 4);
        for c in preset("fig11").unwrap().configs {
            assert_eq!(crate::modulation::efficiency(&c.scheme_config().unwrap()).unwrap(), 4);
        }
    }
}
