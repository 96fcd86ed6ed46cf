//! Load × scheme × seed sweeps with on-disk results and a rerunnable manifest.
//!
//! Layout of a result directory:
//!
//! ```text
//! <root>/config.toml                      resolved base configuration
//! <root>/manifest.txt                     one `run` line per sweep cell
//! <root>/capacity.csv                     per-scheme capacity at the default Y
//! <root>/satisfaction_by_load.csv         seed-averaged satisfied fraction
//! <root>/<scheme>/load_<n>/seed_<s>/      events.log, config.toml, KPI CSVs
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::config::{parse_config, SimConfig};
use crate::kpi::{
    capacity, mcs_histogram, prb_utilization_cdf, satisfaction, write_kpi_csvs, Capacity,
    McsHistogram, DEFAULT_X, DEFAULT_Y,
};
use crate::sim::{simulate, EventLog, RunSummary, Scheme};
use crate::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.txt";
pub const CONFIG_FILE: &str = "config.toml";
pub const EVENTS_FILE: &str = "events.log";

/// One cell of the sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RunSpec {
    pub scheme: Scheme,
    pub load: usize,
    pub seed: u64,
}

impl RunSpec {
    /// Directory of the run relative to the campaign root.
    pub fn rel_dir(&self) -> PathBuf {
        PathBuf::from(self.scheme.name())
            .join(format!("load_{}", self.load))
            .join(format!("seed_{}", self.seed))
    }

    /// `base` specialised to this cell.
    pub fn config(&self, base: &SimConfig) -> SimConfig {
        let mut c = base.clone();
        c.scheme = self.scheme;
        c.seed = self.seed;
        c.topology.ues_per_cell = self.load;
        c
    }
}

/// Every sweep cell of `cfg.campaign`, scheme-major.
pub fn plan(cfg: &SimConfig) -> Vec<RunSpec> {
    let c = &cfg.campaign;
    let mut v = Vec::with_capacity(c.schemes.len() * c.loads.len() * c.seeds.len());
    for &scheme in &c.schemes {
        for &load in &c.loads {
            for &seed in &c.seeds {
                v.push(RunSpec { scheme, load, seed });
            }
        }
    }
    v
}

/// Headline numbers of one finished run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunKpis {
    pub summary: RunSummary,
    pub satisfied_fraction: f64,
    pub median_prb_utilization: f64,
    pub mcs: McsHistogram,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub spec: RunSpec,
    pub config_hash: String,
    /// Error text when the run failed.
    pub result: std::result::Result<RunKpis, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignReport {
    pub root: PathBuf,
    pub base_hash: String,
    pub runs: Vec<RunOutcome>,
}

impl CampaignReport {
    pub fn failures(&self) -> usize {
        self.runs.iter().filter(|r| r.result.is_err()).count()
    }

    fn ok_runs(&self, scheme: Scheme, load: usize) -> impl Iterator<Item = &RunKpis> {
        self.runs
            .iter()
            .filter(move |r| r.spec.scheme == scheme && r.spec.load == load)
            .filter_map(|r| r.result.as_ref().ok())
    }

    /// Seed-averaged satisfied fraction per load.
    pub fn satisfaction_curve(&self, scheme: Scheme) -> BTreeMap<usize, f64> {
        let mut curve = BTreeMap::new();
        for load in self.loads() {
            let v: Vec<f64> = self
                .ok_runs(scheme, load)
                .map(|k| k.satisfied_fraction)
                .collect();
            if !v.is_empty() {
                curve.insert(load, v.iter().sum::<f64>() / v.len() as f64);
            }
        }
        curve
    }

    pub fn capacity(&self, scheme: Scheme, y: f64) -> Capacity {
        capacity(&self.satisfaction_curve(scheme), y)
    }

    /// First-transmission MCS counts pooled over seeds.
    pub fn pooled_mcs(&self, scheme: Scheme, load: usize) -> McsHistogram {
        let mut counts: Vec<u64> = Vec::new();
        for k in self.ok_runs(scheme, load) {
            if counts.len() < k.mcs.counts.len() {
                counts.resize(k.mcs.counts.len(), 0);
            }
            for (c, &x) in counts.iter_mut().zip(&k.mcs.counts) {
                *c += x;
            }
        }
        McsHistogram { counts }
    }

    /// Seed-averaged median PRB utilization.
    pub fn median_utilization(&self, scheme: Scheme, load: usize) -> Option<f64> {
        let v: Vec<f64> = self
            .ok_runs(scheme, load)
            .map(|k| k.median_prb_utilization)
            .collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    pub fn loads(&self) -> Vec<usize> {
        let mut l: Vec<usize> = self.runs.iter().map(|r| r.spec.load).collect();
        l.sort_unstable();
        l.dedup();
        l
    }

    pub fn schemes(&self) -> Vec<Scheme> {
        let mut s: Vec<Scheme> = self.runs.iter().map(|r| r.spec.scheme).collect();
        s.sort_unstable();
        s.dedup();
        s
    }
}

/// Runs one sweep cell and writes its directory under `root`.
pub fn run_one(base: &SimConfig, spec: RunSpec, root: &Path) -> Result<RunKpis> {
    let cfg = spec.config(base);
    let dir = root.join(spec.rel_dir());
    fs::create_dir_all(&dir)?;
    fs::write(dir.join(CONFIG_FILE), cfg.to_toml()?)?;
    let log_path = dir.join(EVENTS_FILE);
    let summary = simulate(&cfg, BufWriter::new(File::create(&log_path)?))?;
    let log = EventLog::parse(std::io::BufReader::new(File::open(&log_path)?))?;
    write_kpi_csvs(&log, &dir)?;
    Ok(RunKpis {
        summary,
        satisfied_fraction: satisfaction(&log, cfg.traffic.pdb_ms, DEFAULT_X)
            .map(|s| s.overall)
            .unwrap_or(0.0),
        median_prb_utilization: prb_utilization_cdf(&log).quantile(0.5).unwrap_or(0.0),
        mcs: mcs_histogram(&log),
    })
}

fn thread_pool(parallelism: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .map_err(|e| Error::Io(format!("cannot start worker pool: {e}")))
}

fn execute(base: &SimConfig, specs: &[RunSpec], root: &Path) -> Result<Vec<RunOutcome>> {
    let pool = thread_pool(base.campaign.parallelism)?;
    let runs = pool.install(|| {
        specs
            .par_iter()
            .map(|&spec| {
                let config_hash = spec.config(base).hash().unwrap_or_default();
                let result = run_one(base, spec, root).map_err(|e| {
                    log::error!("run {:?} failed: {e}", spec);
                    e.to_string()
                });
                RunOutcome {
                    spec,
                    config_hash,
                    result,
                }
            })
            .collect::<Vec<_>>()
    });
    Ok(runs)
}

/// Runs every cell of `cfg.campaign` into `root`.
///
/// A failing run is recorded in the manifest and the report; the others
/// still complete.
pub fn run_campaign(cfg: &SimConfig, root: &Path) -> Result<CampaignReport> {
    cfg.validate()?;
    fs::create_dir_all(root)?;
    fs::write(root.join(CONFIG_FILE), cfg.to_toml()?)?;
    let specs = plan(cfg);
    log::info!("campaign: {} runs into {}", specs.len(), root.display());
    let runs = execute(cfg, &specs, root)?;
    let report = CampaignReport {
        root: root.to_path_buf(),
        base_hash: cfg.hash()?,
        runs,
    };
    fs::write(root.join(MANIFEST_FILE), manifest_text(&report))?;
    write_aggregates(&report)?;
    Ok(report)
}

/// Reruns the campaign recorded under `manifest_dir` into `root`.
///
/// The base configuration is read back from the recorded `config.toml` and
/// every run's configuration hash is checked against the manifest.
pub fn rerun_manifest(manifest_dir: &Path, root: &Path) -> Result<CampaignReport> {
    let text = fs::read_to_string(manifest_dir.join(MANIFEST_FILE))?;
    let manifest = Manifest::parse(&text)?;
    let cfg_text = fs::read_to_string(manifest_dir.join(CONFIG_FILE))?;
    let base = parse_config(&cfg_text, &[])?;
    let hash = base.hash()?;
    if hash != manifest.config_hash {
        return Err(Error::validation(
            "config_hash",
            format!(
                "recorded {} but config.toml hashes to {hash}",
                manifest.config_hash
            ),
        ));
    }
    for e in &manifest.entries {
        let h = e.spec.config(&base).hash()?;
        if h != e.config_hash {
            return Err(Error::validation(
                "config_hash",
                format!(
                    "run {:?} hashes to {h}, manifest says {}",
                    e.spec, e.config_hash
                ),
            ));
        }
    }
    fs::create_dir_all(root)?;
    fs::write(root.join(CONFIG_FILE), &cfg_text)?;
    let specs: Vec<RunSpec> = manifest.entries.iter().map(|e| e.spec).collect();
    let runs = execute(&base, &specs, root)?;
    let report = CampaignReport {
        root: root.to_path_buf(),
        base_hash: hash,
        runs,
    };
    fs::write(root.join(MANIFEST_FILE), manifest_text(&report))?;
    write_aggregates(&report)?;
    Ok(report)
}

fn manifest_text(report: &CampaignReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "version={}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(s, "config_hash={}", report.base_hash);
    let _ = writeln!(s, "runs={}", report.runs.len());
    for r in &report.runs {
        let status = match &r.result {
            Ok(_) => "ok".to_string(),
            Err(e) => format!("error {}", e.replace('\n', " ")),
        };
        let _ = writeln!(
            s,
            "run scheme={} load={} seed={} config_hash={} dir={} status={status}",
            r.spec.scheme,
            r.spec.load,
            r.spec.seed,
            r.config_hash,
            r.spec.rel_dir().display(),
        );
    }
    s
}

fn write_aggregates(report: &CampaignReport) -> Result<()> {
    let mut sat = String::from("scheme,load,metric,value\n");
    let mut cap = String::from("scheme,metric,value\n");
    for scheme in report.schemes() {
        for (load, f) in report.satisfaction_curve(scheme) {
            let _ = writeln!(sat, "{scheme},{load},satisfied_fraction,{f:.6}");
        }
        let c = report.capacity(scheme, DEFAULT_Y);
        let _ = writeln!(cap, "{scheme},capacity_ues_per_cell,{}", c.load);
        let _ = writeln!(cap, "{scheme},non_monotone,{}", u8::from(c.non_monotone));
    }
    fs::write(report.root.join("satisfaction_by_load.csv"), sat)?;
    fs::write(report.root.join("capacity.csv"), cap)?;
    Ok(())
}

/// A parsed `manifest.txt`.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub version: String,
    pub config_hash: String,
    pub entries: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub spec: RunSpec,
    pub config_hash: String,
    pub ok: bool,
}

impl Manifest {
    pub fn parse(text: &str) -> Result<Self> {
        let bad = |line: usize, msg: String| Error::Parse { line, msg };
        let mut version = None;
        let mut config_hash = None;
        let mut entries = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let raw = raw.trim();
            if raw.is_empty() || raw.starts_with('#') {
                continue;
            }
            if let Some(rest) = raw.strip_prefix("run ") {
                let mut fields = BTreeMap::new();
                for tok in rest.split_whitespace() {
                    if let Some((k, v)) = tok.split_once('=') {
                        fields.entry(k).or_insert(v);
                    }
                }
                let get = |k: &str| {
                    fields
                        .get(k)
                        .copied()
                        .ok_or_else(|| bad(line, format!("missing `{k}`")))
                };
                let num = |k: &str| -> Result<u64> {
                    get(k)?.parse().map_err(|_| bad(line, format!("bad `{k}`")))
                };
                let scheme: Scheme = get("scheme")?
                    .parse()
                    .map_err(|e: Error| bad(line, e.to_string()))?;
                entries.push(ManifestEntry {
                    spec: RunSpec {
                        scheme,
                        load: num("load")? as usize,
                        seed: num("seed")?,
                    },
                    config_hash: get("config_hash")?.to_string(),
                    ok: get("status")? == "ok",
                });
            } else if let Some((k, v)) = raw.split_once('=') {
                match k {
                    "version" => version = Some(v.to_string()),
                    "config_hash" => config_hash = Some(v.to_string()),
                    "runs" => {}
                    _ => return Err(bad(line, format!("unknown key `{k}`"))),
                }
            } else {
                return Err(bad(line, format!("unrecognised line `{raw}`")));
            }
        }
        Ok(Self {
            version: version.ok_or_else(|| bad(0, "missing version".into()))?,
            config_hash: config_hash.ok_or_else(|| bad(0, "missing config_hash".into()))?,
            entries,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plan_counts() {
        let mut cfg = SimConfig::default();
        cfg.campaign.loads = vec![1, 2, 3];
        cfg.campaign.seeds = (1..=10).collect();
        assert_eq!(plan(&cfg).len(), 90);
        cfg.campaign.loads = vec![2];
        cfg.campaign.seeds = vec![7];
        cfg.campaign.schemes = vec![Scheme::BaselineTb];
        assert_eq!(
            plan(&cfg),
            vec![RunSpec {
                scheme: Scheme::BaselineTb,
                load: 2,
                seed: 7
            }]
        );
    }

    #[test]
    fn manifest_round_trip() {
        let text = "version=0.1.0\nconfig_hash=abc\nruns=2\n\
            run scheme=baseline_cbg load=3 seed=2 config_hash=def dir=baseline_cbg/load_3/seed_2 status=ok\n\
            run scheme=ecqi_cbg load=1 seed=9 config_hash=0a dir=x status=error disk full\n";
        let m = Manifest::parse(text).unwrap();
        assert_eq!(m.config_hash, "abc");
        assert_eq!(m.entries.len(), 2);
        assert_eq!(m.entries[0].spec.load, 3);
        assert!(m.entries[0].ok);
        assert!(!m.entries[1].ok);
        assert_eq!(m.entries[1].spec.scheme, Scheme::EcqiCbg);
        assert!(Manifest::parse("bogus\n").is_err());
        assert!(Manifest::parse("run scheme=x load=1\nversion=1\nconfig_hash=a\n").is_err());
    }
}
