//! Running configured experiments and writing CSV outputs and manifests.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{ExperimentConfig, PatternSetting};
use crate::error::{Error, Result};
use crate::modulation::{efficiency, SearchMode};
use crate::simulation::{sweep_parameter, BerPoint, ParameterRow, SimPlan, SweepParameter};
use crate::system::Link;

pub const BER_HEADER: [&str; 6] = ["snr_db", "bits", "bit_errors", "ber_sim", "ber_bound", "low_confidence"];

/// Full-precision scientific notation.
pub fn sci(v: f64) -> String {
    format!("{v:e}")
}

pub fn mode_name(mode: SearchMode) -> String {
    match mode {
        SearchMode::Fixed => "fixed",
        SearchMode::Exhaustive => "exhaustive",
        SearchMode::Greedy => "greedy",
    }
    .to_string()
}

/// A finished experiment.
#[derive(Debug)]
pub enum RunResult {
    Curve(Vec<BerPoint>),
    Sweep {
        parameter: SweepParameter,
        snr_db: Vec<f64>,
        rows: Vec<ParameterRow>,
    },
}

impl RunResult {
    pub fn low_confidence(&self) -> bool {
        match self {
            RunResult::Curve(points) => points.iter().any(|p| p.low_confidence),
            RunResult::Sweep { rows, .. } => rows
                .iter()
                .any(|r| r.points.as_ref().map_or(false, |ps| ps.iter().any(|p| p.low_confidence))),
        }
    }

    pub fn points(&self) -> Option<&[BerPoint]> {
        match self {
            RunResult::Curve(points) => Some(points),
            RunResult::Sweep { .. } => None,
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<usize> {
        match self {
            RunResult::Curve(points) => write_ber_csv(out, points),
            RunResult::Sweep {
                parameter,
                snr_db,
                rows,
            } => write_sweep_csv(out, *parameter, snr_db, rows),
        }
    }
}

/// A resolved experiment: its link, the configuration with placement and
/// patterns pinned, and the results.
#[derive(Debug)]
pub struct Experiment {
    pub name: String,
    pub link: Link,
    pub resolved: ExperimentConfig,
    pub result: RunResult,
}

/// The configuration with the link's cells and patterns written out
/// explicitly, so that loading it rebuilds the same link without searching.
pub fn freeze(cfg: &ExperimentConfig, link: &Link) -> ExperimentConfig {
    let mut out = cfg.clone().with_cells(&link.cells);
    out.scheme.patterns = PatternSetting::List(link.patterns().iter().map(|p| p.one_based()).collect());
    out
}

pub fn build_link(cfg: &ExperimentConfig) -> Result<Link> {
    cfg.validate()?;
    cfg.link_spec()?.build()
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Experiment> {
    let link = build_link(cfg)?;
    let resolved = freeze(cfg, &link);
    let stopping = cfg.stopping();
    let snr = cfg.sweep.snr_db.clone();
    let result = match cfg.sweep_parameter() {
        None => RunResult::Curve(SimPlan::new(link.clone(), snr, stopping, cfg.sim.seed)?.run_sweep()?),
        Some(parameter) => {
            let rows = sweep_parameter(
                &resolved.link_spec()?,
                parameter,
                &cfg.sweep.values,
                &snr,
                stopping,
                cfg.sim.seed,
            )?;
            RunResult::Sweep {
                parameter,
                snr_db: snr,
                rows,
            }
        }
    };
    Ok(Experiment {
        name: cfg.name(),
        link,
        resolved,
        result,
    })
}

fn ber_fields(p: &BerPoint) -> [String; 5] {
    [
        p.bits_simulated.to_string(),
        p.bit_errors.to_string(),
        sci(p.ber_sim),
        sci(p.ber_bound),
        p.low_confidence.to_string(),
    ]
}

pub fn write_ber_csv<W: Write>(out: W, points: &[BerPoint]) -> Result<usize> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(BER_HEADER)?;
    for p in points {
        let f = ber_fields(p);
        w.write_record(std::iter::once(p.snr_db.to_string()).chain(f))?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(points.len())
}

pub fn parameter_column(p: SweepParameter) -> &'static str {
    match p {
        SweepParameter::TxSpacing => "d_tx",
        SweepParameter::SemiangleDeg => "semiangle_deg",
    }
}

/// One row per (value, SNR); failed values keep their rows with the error
/// message in the last column.
pub fn write_sweep_csv<W: Write>(
    out: W,
    parameter: SweepParameter,
    snr_db: &[f64],
    rows: &[ParameterRow],
) -> Result<usize> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec![parameter_column(parameter)];
    header.extend(BER_HEADER);
    header.push("error");
    w.write_record(&header)?;
    let mut n = 0;
    for row in rows {
        match &row.points {
            Ok(points) => {
                for p in points {
                    let mut rec = vec![row.value.to_string(), p.snr_db.to_string()];
                    rec.extend(ber_fields(p));
                    rec.push(String::new());
                    w.write_record(&rec)?;
                    n += 1;
                }
            }
            Err(e) => {
                for s in snr_db {
                    let mut rec = vec![row.value.to_string(), s.to_string()];
                    rec.extend(std::iter::repeat_n(String::new(), 5));
                    rec.push(e.to_string());
                    w.write_record(&rec)?;
                    n += 1;
                }
            }
        }
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(n)
}

pub fn write_bound_csv<W: Write>(out: W, rows: &[(f64, f64)]) -> Result<usize> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["snr_db", "ber_bound"])?;
    for (s, b) in rows {
        w.write_record([s.to_string(), sci(*b)])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(rows.len())
}

/// Side-by-side curves over a shared SNR grid; one column group per scheme.
pub fn write_compare_csv<W: Write>(out: W, curves: &[(String, Vec<BerPoint>)]) -> Result<usize> {
    let Some((_, first)) = curves.first() else {
        return Err(Error::Config("nothing to compare".into()));
    };
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["snr_db".to_string()];
    for (name, _) in curves {
        for col in ["bit_errors", "ber_sim", "ber_bound"] {
            header.push(format!("{name}_{col}"));
        }
    }
    w.write_record(&header)?;
    for (i, p0) in first.iter().enumerate() {
        let mut rec = vec![p0.snr_db.to_string()];
        for (_, points) in curves {
            let p = &points[i];
            rec.extend([p.bit_errors.to_string(), sci(p.ber_sim), sci(p.ber_bound)]);
        }
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(first.len())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRun {
    pub name: String,
    pub label: String,
    pub efficiency: u32,
    /// One-based occupied cells.
    pub cells: Vec<usize>,
    pub pattern_search: String,
    pub config: ExperimentConfig,
}

impl ManifestRun {
    pub fn new(name: &str, resolved: &ExperimentConfig, link: &Link) -> Result<Self> {
        let scheme = resolved.scheme_config()?;
        Ok(Self {
            name: name.to_string(),
            label: scheme.label(),
            efficiency: efficiency(&scheme)?,
            cells: link.cells.iter().map(|c| c + 1).collect(),
            pattern_search: mode_name(link.pattern_mode),
            config: resolved.clone(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputRecord {
    pub file: String,
    pub sha256: String,
    pub rows: usize,
}

/// Everything needed to repeat a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub runs: Vec<ManifestRun>,
    pub outputs: Vec<OutputRecord>,
}

impl Manifest {
    pub fn new(command: &str, seed: u64) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            seed,
            runs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    /// Records a file already written to `dir`.
    pub fn record(&mut self, dir: &Path, file: &str, rows: usize) -> Result<()> {
        let path = dir.join(file);
        let sha256 = sha256_file(&path)?;
        self.outputs.push(OutputRecord {
            file: file.to_string(),
            sha256,
            rows,
        });
        Ok(())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })
    }
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub fn create_file(path: &Path) -> Result<fs::File> {
    fs::File::create(path).map_err(|e| Error::io(path, e))
}

pub fn ensure_dir(dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    Ok(dir.to_path_buf())
}

/// Writes an experiment's CSV into `dir` as `<prefix><name>.csv` and adds
/// it to the manifest.
pub fn write_experiment(dir: &Path, prefix: &str, exp: &Experiment, manifest: &mut Manifest) -> Result<String> {
    let file = format!("{prefix}{}.csv", exp.name);
    let rows = exp.result.write_csv(create_file(&dir.join(&file))?)?;
    manifest.runs.push(ManifestRun::new(&exp.name, &exp.resolved, &exp.link)?);
    manifest.record(dir, &file, rows)?;
    Ok(file)
}
