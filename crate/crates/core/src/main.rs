use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use gsm_vlc::config::{load_config, ExperimentConfig};
use gsm_vlc::detection::UnionBound;
use gsm_vlc::error::{Error, Result};
use gsm_vlc::modulation::{d_avg, d_min, efficiency};
use gsm_vlc::placement::{grid_art, optimize_placement};
use gsm_vlc::presets::{run_preset, PresetOptions};
use gsm_vlc::runner::{
    build_link, create_file, ensure_dir, mode_name, run_experiment, sci, write_bound_csv, write_compare_csv,
    write_experiment, Manifest, ManifestRun,
};
use gsm_vlc::simulation::{calibrate_sigma, StoppingRule};

/// Visible-light GSM link simulator.
#[derive(Debug, Parser)]
#[command(name = "gsm-vlc", version)]
struct Cli {
    /// Experiment configuration (TOML). `compare` takes several.
    #[arg(long, global = true)]
    config: Vec<PathBuf>,
    /// Master seed, overriding `sim.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; without it most commands print CSV to stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads. Results do not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args, Clone, Copy)]
struct StopArgs {
    /// Bit errors to collect per SNR point.
    #[arg(long)]
    min_errors: Option<u64>,
    /// Channel-use cap per SNR point.
    #[arg(long)]
    max_uses: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the channel matrix (rows are detectors).
    Channel,
    /// Print efficiency and distance metrics.
    Metrics,
    /// Union bound over the SNR grid.
    Bound,
    /// Monte Carlo BER over the SNR grid.
    Simulate {
        #[command(flatten)]
        stop: StopArgs,
    },
    /// Search LED placements on the transmitter grid.
    PlaceOpt {
        /// Number of placements listed.
        #[arg(long, default_value_t = 10)]
        top: usize,
    },
    /// Simulate several configurations over the first one's SNR grid.
    Compare {
        /// Allow schemes with different efficiencies.
        #[arg(long)]
        allow_mixed_efficiency: bool,
        #[command(flatten)]
        stop: StopArgs,
    },
    /// Run a named experiment preset.
    Preset {
        name: String,
        #[command(flatten)]
        stop: StopArgs,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<u8> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    match &cli.command {
        Command::Channel => {
            let cfg = single_config(&cli)?;
            let link = build_link(&cfg)?;
            match out_dir(&cli, &cfg) {
                Some(dir) => {
                    let path = ensure_dir(&dir)?.join(format!("{}_channel.csv", cfg.name()));
                    link.channel.write_csv(create_file(&path)?)?;
                }
                None => link.channel.write_csv(io::stdout().lock())?,
            }
            Ok(0)
        }
        Command::Metrics => {
            let cfg = single_config(&cli)?;
            let scheme = cfg.scheme_config()?;
            let link = build_link(&cfg)?;
            let g = cfg.geometry()?;
            let mut o = io::stdout().lock();
            let patterns: Vec<String> = link.patterns().iter().map(|p| p.to_string()).collect();
            let cells: Vec<String> = link.cells.iter().map(|c| (c + 1).to_string()).collect();
            writeln!(o, "scheme        {}", scheme.label()).ok();
            writeln!(o, "efficiency    {} bpcu", efficiency(&scheme)?).ok();
            writeln!(o, "signal set    {} vectors", link.set.len()).ok();
            writeln!(o, "cells         {}", cells.join(" ")).ok();
            writeln!(o, "patterns      {} ({})", patterns.join(" "), mode_name(link.pattern_mode)).ok();
            writeln!(o, "d_min         {}", sci(d_min(&link.channel, &link.set)?)).ok();
            writeln!(o, "d_avg         {}", sci(d_avg(&link.channel, &link.set)?)).ok();
            write!(o, "{}", grid_art(&link.cells, g.tx_grid.rows, g.tx_grid.cols)).ok();
            Ok(0)
        }
        Command::Bound => {
            let cfg = single_config(&cli)?;
            let link = build_link(&cfg)?;
            let ub = UnionBound::new(&link.channel, &link.set)?;
            let rows = cfg
                .sweep
                .snr_db
                .iter()
                .map(|&s| {
                    let sigma = calibrate_sigma(&link.channel, &link.set, link.responsivity, s)?;
                    Ok((s, ub.ber(link.responsivity, sigma)))
                })
                .collect::<Result<Vec<_>>>()?;
            match out_dir(&cli, &cfg) {
                Some(dir) => {
                    let path = ensure_dir(&dir)?.join(format!("{}_bound.csv", cfg.name()));
                    write_bound_csv(create_file(&path)?, &rows)?;
                }
                None => {
                    write_bound_csv(io::stdout().lock(), &rows)?;
                }
            }
            Ok(0)
        }
        Command::Simulate { stop } => {
            let cfg = apply(single_config(&cli)?, cli.seed, stop);
            let exp = run_experiment(&cfg)?;
            match out_dir(&cli, &cfg) {
                Some(dir) => {
                    let dir = ensure_dir(&dir)?;
                    let mut manifest = Manifest::new("simulate", cfg.sim.seed);
                    write_experiment(&dir, "", &exp, &mut manifest)?;
                    manifest.write(&dir.join(format!("{}_manifest.json", exp.name)))?;
                }
                None => {
                    exp.result.write_csv(io::stdout().lock())?;
                }
            }
            Ok(if exp.result.low_confidence() { 3 } else { 0 })
        }
        Command::PlaceOpt { top } => {
            let cfg = single_config(&cli)?;
            let g = cfg.geometry()?;
            let scheme = cfg.scheme_config()?;
            let res = optimize_placement(&g, &scheme)?;
            let mut o = io::stdout().lock();
            writeln!(o, "{} on a {}x{} grid, {} placements", scheme.label(), g.tx_grid.rows, g.tx_grid.cols, res.evaluated).ok();
            write!(o, "{}", grid_art(&res.best.cells, g.tx_grid.rows, g.tx_grid.cols)).ok();
            let patterns: Vec<String> = res.patterns.iter().map(|p| p.to_string()).collect();
            writeln!(o, "patterns {} ({})", patterns.join(" "), mode_name(res.pattern_mode)).ok();
            writeln!(o, "symmetric placements {}", res.orbit.len()).ok();
            drop(o);
            let mut rows = vec![&res.best];
            rows.extend(res.runners_up.iter().take(top.saturating_sub(1)));
            let write = |out: &mut dyn Write| -> Result<()> {
                let mut w = csv::Writer::from_writer(out);
                w.write_record(["rank", "cells", "d_min", "d_avg"])?;
                for (i, c) in rows.iter().enumerate() {
                    let cells: Vec<String> = c.cells.iter().map(|v| (v + 1).to_string()).collect();
                    w.write_record([(i + 1).to_string(), cells.join(" "), sci(c.d_min), sci(c.d_avg)])?;
                }
                w.flush().map_err(|e| Error::io("<csv>", e))
            };
            match out_dir(&cli, &cfg) {
                Some(dir) => {
                    let path = ensure_dir(&dir)?.join(format!("{}_placements.csv", cfg.name()));
                    write(&mut create_file(&path)?)?;
                }
                None => write(&mut io::stdout().lock())?,
            }
            Ok(0)
        }
        Command::Compare {
            allow_mixed_efficiency,
            stop,
        } => {
            if cli.config.len() < 2 {
                return Err(Error::Config("compare needs at least two --config files".into()));
            }
            let configs: Vec<(PathBuf, ExperimentConfig)> = cli
                .config
                .iter()
                .map(|p| Ok((p.clone(), apply(load_config(p)?, cli.seed, stop))))
                .collect::<Result<_>>()?;
            let (p0, c0) = &configs[0];
            let eta0 = efficiency(&c0.scheme_config()?)?;
            for (p, c) in &configs[1..] {
                let eta = efficiency(&c.scheme_config()?)?;
                if eta != eta0 && !allow_mixed_efficiency {
                    return Err(Error::Config(format!(
                        "{} runs at {eta0} bpcu but {} runs at {eta} bpcu; pass --allow-mixed-efficiency to compare anyway",
                        p0.display(),
                        p.display()
                    )));
                }
            }
            let mut manifest = Manifest::new("compare", c0.sim.seed);
            let mut curves = Vec::new();
            for (i, (_, c)) in configs.iter().enumerate() {
                let mut c = c.clone();
                c.sweep.snr_db = c0.sweep.snr_db.clone();
                if c.sweep.parameter.is_some() {
                    return Err(Error::Config("compare takes SNR sweeps only".into()));
                }
                let exp = run_experiment(&c)?;
                let name = if curves.iter().any(|(n, _): &(String, _)| *n == exp.name) {
                    format!("{}_{}", exp.name, i + 1)
                } else {
                    exp.name.clone()
                };
                manifest.runs.push(ManifestRun::new(&name, &exp.resolved, &exp.link)?);
                curves.push((name, exp.result.points().unwrap_or_default().to_vec()));
            }
            let low = curves.iter().any(|(_, ps)| ps.iter().any(|p| p.low_confidence));
            match out_dir(&cli, c0) {
                Some(dir) => {
                    let dir = ensure_dir(&dir)?;
                    let rows = write_compare_csv(create_file(&dir.join("compare.csv"))?, &curves)?;
                    manifest.record(&dir, "compare.csv", rows)?;
                    manifest.write(&dir.join("compare_manifest.json"))?;
                }
                None => {
                    write_compare_csv(io::stdout().lock(), &curves)?;
                }
            }
            Ok(if low { 3 } else { 0 })
        }
        Command::Preset { name, stop } => {
            let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("out"));
            let opts = PresetOptions {
                seed: cli.seed,
                stopping: stopping_override(stop),
            };
            let manifest = run_preset(name, &out, &opts)?;
            for o in &manifest.outputs {
                println!("{}", Path::new(&out).join(&o.file).display());
            }
            Ok(0)
        }
    }
}

fn out_dir(cli: &Cli, cfg: &ExperimentConfig) -> Option<PathBuf> {
    cli.out
        .clone()
        .or_else(|| (!cfg.output.dir.is_empty()).then(|| PathBuf::from(&cfg.output.dir)))
}

fn single_config(cli: &Cli) -> Result<ExperimentConfig> {
    match cli.config.as_slice() {
        [one] => load_config(one),
        [] => Err(Error::Config("--config is required".into())),
        _ => Err(Error::Config("this command takes a single --config".into())),
    }
}

fn stopping_override(stop: &StopArgs) -> Option<StoppingRule> {
    if stop.min_errors.is_none() && stop.max_uses.is_none() {
        return None;
    }
    let d = StoppingRule::default();
    Some(StoppingRule {
        min_bit_errors: stop.min_errors.unwrap_or(d.min_bit_errors),
        max_channel_uses: stop.max_uses.unwrap_or(d.max_channel_uses),
    })
}

fn apply(mut cfg: ExperimentConfig, seed: Option<u64>, stop: &StopArgs) -> ExperimentConfig {
    if let Some(s) = seed {
        cfg.sim.seed = s;
    }
    if let Some(n) = stop.min_errors {
        cfg.sim.min_bit_errors = n;
    }
    if let Some(n) = stop.max_uses {
        cfg.sim.max_channel_uses = n;
    }
    cfg
}
