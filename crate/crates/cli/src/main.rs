use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use ecqi_core::campaign::{rerun_manifest, run_campaign, CONFIG_FILE, EVENTS_FILE};
use ecqi_core::config::{load_config, parse_config, SimConfig};
use ecqi_core::kpi::{
    capacity, delay_percentile, harq_stats, mcs_histogram, prb_utilization_cdf, satisfaction,
    write_kpi_csvs, DEFAULT_X, DEFAULT_Y,
};
use ecqi_core::sim::{simulate, EventLog};

/// Multi-cell XR downlink simulator with CBG-aware CQI reporting.
#[derive(Debug, Parser)]
#[command(name = "ecqi-sim", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct ConfigArgs {
    /// TOML configuration; defaults apply when omitted.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Override any key, e.g. `--set ecqi.n=3`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<SimConfig> {
        let cfg = match &self.config {
            Some(p) => load_config(p, &self.overrides),
            None => parse_config("", &self.overrides),
        };
        cfg.context("invalid configuration")
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a configuration and print it fully resolved.
    Validate {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Print the resolved configuration.
        #[arg(long)]
        print: bool,
    },
    /// Simulate one configuration and write its event log and KPIs.
    Run {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Run the load × scheme × seed sweep of the configuration.
    Sweep {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(short, long)]
        out: PathBuf,
        /// Rerun the campaign recorded in this result directory instead.
        #[arg(long, conflicts_with_all = ["config", "overrides"])]
        rerun: Option<PathBuf>,
    },
    /// Recompute KPI CSVs from event logs.
    Analyze {
        /// Event logs, or run directories containing `events.log`.
        #[arg(required = true)]
        logs: Vec<PathBuf>,
        /// Where to write the CSVs; next to each log when omitted.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Validate { cfg, print } => {
            let c = cfg.load()?;
            if print {
                print!("{}", c.to_toml()?);
            }
            println!("ok config_hash={}", c.hash()?);
        }
        Command::Run { cfg, out } => {
            let c = cfg.load()?;
            single_run(&c, &out)?;
        }
        Command::Sweep { cfg, out, rerun } => {
            let report = match rerun {
                Some(dir) => rerun_manifest(&dir, &out)
                    .with_context(|| format!("rerun of {}", dir.display()))?,
                None => run_campaign(&cfg.load()?, &out)?,
            };
            for scheme in report.schemes() {
                let curve = report.satisfaction_curve(scheme);
                let cap = capacity(&curve, DEFAULT_Y);
                let pts: Vec<String> = curve.iter().map(|(l, f)| format!("{l}:{f:.3}")).collect();
                println!(
                    "{scheme:<13} capacity={} satisfied=[{}]{}",
                    cap.load,
                    pts.join(" "),
                    if cap.non_monotone {
                        " (non-monotone)"
                    } else {
                        ""
                    }
                );
            }
            if report.failures() > 0 {
                bail!(
                    "{} of {} runs failed; see manifest.txt",
                    report.failures(),
                    report.runs.len()
                );
            }
        }
        Command::Analyze { logs, out } => {
            for path in logs {
                analyze(&path, out.as_deref())?;
            }
        }
    }
    Ok(())
}

fn single_run(cfg: &SimConfig, out: &Path) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    fs::write(out.join(CONFIG_FILE), cfg.to_toml()?)?;
    let log_path = out.join(EVENTS_FILE);
    let summary = simulate(cfg, BufWriter::new(File::create(&log_path)?))?;
    log::info!(
        "{} slots, {} transmissions, {} delivered, {} dropped",
        summary.slots,
        summary.transmissions,
        summary.packets_delivered,
        summary.packets_dropped
    );
    analyze(&log_path, Some(out))
}

fn analyze(path: &Path, out: Option<&Path>) -> Result<()> {
    let log_path = if path.is_dir() {
        path.join(EVENTS_FILE)
    } else {
        path.to_path_buf()
    };
    let file = File::open(&log_path).with_context(|| format!("opening {}", log_path.display()))?;
    let log = EventLog::parse(BufReader::new(file))
        .with_context(|| format!("parsing {}", log_path.display()))?;
    let dir = match out {
        Some(d) => d.to_path_buf(),
        None => log_path.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    write_kpi_csvs(&log, &dir)?;
    let pdb = log.meta.as_ref().map_or(10.0, |m| m.pdb_ms);
    let sat = satisfaction(&log, pdb, DEFAULT_X)
        .map(|s| s.overall)
        .unwrap_or(0.0);
    let util = prb_utilization_cdf(&log).quantile(0.5).unwrap_or(0.0);
    let h = harq_stats(&log);
    let p99 = delay_percentile(&log, 99.0).map_or("n/a".to_string(), |d| format!("{d:.2}"));
    println!(
        "{}: satisfied={sat:.3} median_util={util:.3} mean_mcs={:.2} tber={:.3} p99_delay_ms={p99}",
        log_path.display(),
        mcs_histogram(&log).mean(),
        h.first_tx_tber,
    );
    Ok(())
}
