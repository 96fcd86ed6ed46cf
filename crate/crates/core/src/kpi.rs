//! KPIs computed from event logs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::sim::{EventLog, PacketStatus};
use crate::{Error, Result};

/// Default share of packets a UE must receive in time.
pub const DEFAULT_X: f64 = 0.99;
/// Default share of UEs that must be satisfied.
pub const DEFAULT_Y: f64 = 0.90;

/// Slack when comparing delays against the budget, in ms.
const DELAY_EPS_MS: f64 = 1e-9;

pub const CSV_HEADER: &str = "load,cell,metric,value";

#[derive(Debug, Clone, PartialEq)]
pub struct UeSatisfaction {
    pub ue: usize,
    pub cell: usize,
    pub packets: usize,
    pub in_time: usize,
    pub fraction: f64,
    pub satisfied: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SatisfactionReport {
    pub ues: Vec<UeSatisfaction>,
    /// Satisfied share of UEs per cell.
    pub per_cell: BTreeMap<usize, f64>,
    /// Satisfied share of all UEs.
    pub overall: f64,
}

fn warmup_ms(log: &EventLog) -> f64 {
    log.meta.as_ref().map_or(0.0, |m| m.warmup_ms)
}

/// A UE is satisfied when at least `x` of its packets arrive within
/// `pdb_ms` (boundary inclusive). Packets arriving during warm-up are
/// ignored.
pub fn satisfaction(log: &EventLog, pdb_ms: f64, x: f64) -> Result<SatisfactionReport> {
    let warmup = warmup_ms(log);
    let mut per_ue: BTreeMap<usize, (usize, usize, usize)> = BTreeMap::new();
    for p in log.packets.iter().filter(|p| p.arrival_ms >= warmup) {
        let e = per_ue.entry(p.ue).or_insert((p.cell, 0, 0));
        e.1 += 1;
        if p.delay_ms().is_some_and(|d| d <= pdb_ms + DELAY_EPS_MS) {
            e.2 += 1;
        }
    }
    if per_ue.is_empty() {
        return Err(Error::domain("no packets in the event log"));
    }
    let ues: Vec<UeSatisfaction> = per_ue
        .into_iter()
        .map(|(ue, (cell, packets, in_time))| {
            let fraction = in_time as f64 / packets as f64;
            UeSatisfaction {
                ue,
                cell,
                packets,
                in_time,
                fraction,
                satisfied: in_time as f64 >= x * packets as f64 - 1e-9,
            }
        })
        .collect();
    let mut cells: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for u in &ues {
        let c = cells.entry(u.cell).or_default();
        c.0 += 1;
        c.1 += usize::from(u.satisfied);
    }
    let per_cell = cells
        .into_iter()
        .map(|(c, (n, s))| (c, s as f64 / n as f64))
        .collect();
    let overall = ues.iter().filter(|u| u.satisfied).count() as f64 / ues.len() as f64;
    Ok(SatisfactionReport {
        ues,
        per_cell,
        overall,
    })
}

/// Satisfied-user share per load (UEs per cell).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CapacityCurve {
    pub points: BTreeMap<usize, f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Capacity {
    /// Largest load meeting the threshold, 0 if none does.
    pub load: usize,
    /// Some load above a failing load meets the threshold again.
    pub non_monotone: bool,
}

impl CapacityCurve {
    pub fn new(points: impl IntoIterator<Item = (usize, f64)>) -> Self {
        Self {
            points: points.into_iter().collect(),
        }
    }

    pub fn capacity(&self, y: f64) -> Capacity {
        capacity(&self.points, y)
    }
}

/// Largest load whose satisfied share is at least `y`.
pub fn capacity(points: &BTreeMap<usize, f64>, y: f64) -> Capacity {
    let ok = |f: f64| f >= y - 1e-12;
    let load = points
        .iter()
        .rev()
        .find(|(_, f)| ok(**f))
        .map_or(0, |(l, _)| *l);
    let mut seen_fail = false;
    let mut non_monotone = false;
    for f in points.values() {
        if !ok(*f) {
            seen_fail = true;
        } else if seen_fail {
            non_monotone = true;
        }
    }
    if non_monotone {
        log::warn!("satisfaction is not monotone in the load; capacity {load} is the largest qualifying point");
    }
    Capacity { load, non_monotone }
}

/// Empirical distribution of a sample.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EmpiricalCdf {
    sorted: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn new(mut samples: Vec<f64>) -> Self {
        samples.retain(|v| !v.is_nan());
        samples.sort_by(f64::total_cmp);
        Self { sorted: samples }
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    /// Share of samples `<= x`.
    pub fn at(&self, x: f64) -> f64 {
        if self.sorted.is_empty() {
            return 0.0;
        }
        self.sorted.partition_point(|&v| v <= x + 1e-12) as f64 / self.sorted.len() as f64
    }

    /// Nearest-rank `q`-quantile, `q` in `[0, 1]`.
    pub fn quantile(&self, q: f64) -> Option<f64> {
        if self.sorted.is_empty() {
            return None;
        }
        let n = self.sorted.len();
        let rank = ((q * n as f64) - 1e-9).ceil().clamp(1.0, n as f64) as usize;
        Some(self.sorted[rank - 1])
    }

    /// `(x, F(x))` on a grid of `steps + 1` points over `[0, 1]`.
    pub fn unit_grid(&self, steps: usize) -> Vec<(f64, f64)> {
        (0..=steps)
            .map(|i| {
                let x = i as f64 / steps as f64;
                (x, self.at(x))
            })
            .collect()
    }
}

/// Per-cell, per-downlink-slot share of PRBs in use.
pub fn prb_utilization_cdf(log: &EventLog) -> EmpiricalCdf {
    EmpiricalCdf::new(
        log.slots
            .iter()
            .map(|s| s.used as f64 / s.total.max(1) as f64)
            .collect(),
    )
}

/// Per-cell variant of [`prb_utilization_cdf`].
pub fn prb_utilization_cdf_by_cell(log: &EventLog) -> BTreeMap<usize, EmpiricalCdf> {
    let mut by: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for s in &log.slots {
        by.entry(s.cell)
            .or_default()
            .push(s.used as f64 / s.total.max(1) as f64);
    }
    by.into_iter()
        .map(|(c, v)| (c, EmpiricalCdf::new(v)))
        .collect()
}

/// Delays (ms) of packets delivered after warm-up.
pub fn packet_delays(log: &EventLog) -> Vec<f64> {
    let warmup = warmup_ms(log);
    log.packets
        .iter()
        .filter(|p| p.arrival_ms >= warmup)
        .filter_map(|p| p.delay_ms())
        .collect()
}

/// Nearest-rank `q`-th percentile (`q` in `[0, 100]`) of packet delays.
pub fn delay_percentile(log: &EventLog, q: f64) -> Result<f64> {
    if !(0.0..=100.0).contains(&q) {
        return Err(Error::domain(format!("percentile {q} outside [0, 100]")));
    }
    EmpiricalCdf::new(packet_delays(log))
        .quantile(q / 100.0)
        .ok_or_else(|| Error::domain("no delivered packets"))
}

/// Counts of selected MCS indices over first transmissions.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct McsHistogram {
    pub counts: Vec<u64>,
}

impl McsHistogram {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn pmf(&self) -> Vec<f64> {
        let t = self.total().max(1) as f64;
        self.counts.iter().map(|&c| c as f64 / t).collect()
    }

    /// `P(index <= r)`.
    pub fn cdf(&self, r: usize) -> f64 {
        let t = self.total();
        if t == 0 {
            return 0.0;
        }
        self.counts.iter().take(r + 1).sum::<u64>() as f64 / t as f64
    }

    /// True when this distribution lies at or right of `other` at every
    /// index, i.e. its CDF never exceeds the other's.
    pub fn dominates(&self, other: &McsHistogram) -> bool {
        let n = self.counts.len().max(other.counts.len());
        (0..n).all(|r| self.cdf(r) <= other.cdf(r) + 1e-12)
    }

    pub fn mean(&self) -> f64 {
        let t = self.total().max(1) as f64;
        self.counts
            .iter()
            .enumerate()
            .map(|(i, &c)| i as f64 * c as f64)
            .sum::<f64>()
            / t
    }
}

pub fn mcs_histogram(log: &EventLog) -> McsHistogram {
    let mut counts = Vec::new();
    for t in log.tx.iter().filter(|t| t.attempt == 1) {
        if counts.len() <= t.mcs {
            counts.resize(t.mcs + 1, 0);
        }
        counts[t.mcs] += 1;
    }
    McsHistogram { counts }
}

/// First-transmission error statistics.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HarqStats {
    pub first_tx: u64,
    /// Share of first transmissions with a failed CBG.
    pub first_tx_tber: f64,
    /// Share of first-transmission CBGs that failed.
    pub first_tx_cbg_failure: f64,
    /// Retransmissions per first transmission.
    pub retx_per_tb: f64,
}

pub fn harq_stats(log: &EventLog) -> HarqStats {
    let first: Vec<_> = log.tx.iter().filter(|t| t.attempt == 1).collect();
    let n = first.len() as u64;
    if n == 0 {
        return HarqStats::default();
    }
    let failed = first
        .iter()
        .filter(|t| t.cbg_acks.iter().any(|a| !a))
        .count();
    let cbgs: usize = first.iter().map(|t| t.cbg_acks.len()).sum();
    let bad: usize = first
        .iter()
        .map(|t| t.cbg_acks.iter().filter(|a| !**a).count())
        .sum();
    HarqStats {
        first_tx: n,
        first_tx_tber: failed as f64 / n as f64,
        first_tx_cbg_failure: bad as f64 / cbgs.max(1) as f64,
        retx_per_tb: (log.tx.len() as u64 - n) as f64 / n as f64,
    }
}

/// Packets of one run: delivered in time, delivered late, dropped.
pub fn packet_outcomes(log: &EventLog, pdb_ms: f64) -> (usize, usize, usize) {
    let warmup = warmup_ms(log);
    let mut out = (0, 0, 0);
    for p in log.packets.iter().filter(|p| p.arrival_ms >= warmup) {
        match p.status {
            PacketStatus::Dropped => out.2 += 1,
            PacketStatus::Delivered { .. } => {
                if p.delay_ms().is_some_and(|d| d <= pdb_ms + DELAY_EPS_MS) {
                    out.0 += 1;
                } else {
                    out.1 += 1;
                }
            }
        }
    }
    out
}

fn row(out: &mut String, load: usize, cell: &str, metric: &str, value: f64) {
    writeln!(out, "{load},{cell},{metric},{value:.6}").expect("write to string");
}

/// The KPI CSV files of one run as `(file name, contents)`.
pub fn kpi_csvs(log: &EventLog) -> Result<Vec<(&'static str, String)>> {
    let meta = log.meta.as_ref().ok_or_else(|| Error::EventLog {
        line: 0,
        msg: "missing meta record".into(),
    })?;
    let load = meta.load;
    let pdb = meta.pdb_ms;
    let mut files = Vec::new();

    let mut s = format!("{CSV_HEADER}\n");
    if let Ok(rep) = satisfaction(log, pdb, DEFAULT_X) {
        for (cell, f) in &rep.per_cell {
            row(&mut s, load, &cell.to_string(), "satisfied_fraction", *f);
        }
        row(&mut s, load, "all", "satisfied_fraction", rep.overall);
        for u in &rep.ues {
            row(
                &mut s,
                load,
                &u.cell.to_string(),
                &format!("ue{}_in_time_fraction", u.ue),
                u.fraction,
            );
        }
    }
    let (in_time, late, dropped) = packet_outcomes(log, pdb);
    row(&mut s, load, "all", "packets_in_time", in_time as f64);
    row(&mut s, load, "all", "packets_late", late as f64);
    row(&mut s, load, "all", "packets_dropped", dropped as f64);
    files.push(("satisfaction.csv", s));

    let mut s = format!("{CSV_HEADER}\n");
    let mut cdfs: Vec<(String, EmpiricalCdf)> = prb_utilization_cdf_by_cell(log)
        .into_iter()
        .map(|(c, v)| (c.to_string(), v))
        .collect();
    cdfs.push(("all".into(), prb_utilization_cdf(log)));
    for (cell, cdf) in &cdfs {
        if let Some(m) = cdf.quantile(0.5) {
            row(&mut s, load, cell, "median", m);
        }
        for (x, f) in cdf.unit_grid(100) {
            row(&mut s, load, cell, &format!("cdf_{x:.2}"), f);
        }
    }
    files.push(("prb_utilization.csv", s));

    let mut s = format!("{CSV_HEADER}\n");
    for q in [50.0, 90.0, 99.0] {
        if let Ok(d) = delay_percentile(log, q) {
            row(&mut s, load, "all", &format!("p{q:.0}_ms"), d);
        }
    }
    files.push(("delay.csv", s));

    let mut s = format!("{CSV_HEADER}\n");
    let h = mcs_histogram(log);
    row(&mut s, load, "all", "mean_index", h.mean());
    for r in 0..h.counts.len() {
        row(&mut s, load, "all", &format!("cdf_{r}"), h.cdf(r));
    }
    files.push(("mcs.csv", s));

    let mut s = format!("{CSV_HEADER}\n");
    let hs = harq_stats(log);
    row(&mut s, load, "all", "first_tx", hs.first_tx as f64);
    row(&mut s, load, "all", "first_tx_tber", hs.first_tx_tber);
    row(
        &mut s,
        load,
        "all",
        "first_tx_cbg_failure",
        hs.first_tx_cbg_failure,
    );
    row(&mut s, load, "all", "retx_per_tb", hs.retx_per_tb);
    files.push(("harq.csv", s));
    Ok(files)
}

/// Writes [`kpi_csvs`] into `dir`.
pub fn write_kpi_csvs(log: &EventLog, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for (name, body) in kpi_csvs(log)? {
        std::fs::write(dir.join(name), body)?;
    }
    Ok(())
}
