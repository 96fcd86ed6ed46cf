//! Simulator configuration: TOML file, dotted-path overrides, defaults and
//! validation.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ecqi::EcqiConfig;
use crate::link::{McsTable, MiCurve};
use crate::sim::{
    ChannelParams, FramePattern, OllaParams, Scheme, TopologyParams, TruncGaussianParams,
};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrameParams {
    pub pattern: String,
    pub slot_ms: f64,
    pub symbols_per_slot: u32,
    /// Downlink symbols of the special slot, control included.
    pub special_dl_symbols: u32,
    pub control_symbols: u32,
    /// gNB transmit processing latency, in whole symbols.
    pub tx_processing_symbols: u32,
}

impl Default for FrameParams {
    fn default() -> Self {
        Self {
            pattern: "DDDSU".into(),
            slot_ms: 0.5,
            symbols_per_slot: 14,
            special_dl_symbols: 10,
            control_symbols: 1,
            tx_processing_symbols: 3,
        }
    }
}

impl FrameParams {
    pub fn pattern(&self) -> Result<FramePattern> {
        FramePattern::new(
            &self.pattern,
            self.symbols_per_slot,
            self.special_dl_symbols,
            self.control_symbols,
        )
        .map_err(|e| Error::validation("frame.pattern", e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CarrierParams {
    pub prbs: usize,
    pub scs_khz: f64,
}

impl Default for CarrierParams {
    fn default() -> Self {
        Self {
            prbs: 51,
            scs_khz: 30.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrafficParams {
    pub fps: f64,
    pub jitter_ms: TruncGaussianParams,
    pub frame_kbytes: TruncGaussianParams,
    /// Multiplies frame sizes, e.g. to match a narrower carrier.
    pub size_scale: f64,
    pub source_rate_label: String,
    pub pdb_ms: f64,
    /// Drop queued packets once their deadline has passed.
    pub discard_expired: bool,
}

impl Default for TrafficParams {
    fn default() -> Self {
        Self {
            fps: 60.0,
            jitter_ms: TruncGaussianParams {
                mean: 0.0,
                std: 2.0,
                lower: -4.0,
                upper: 4.0,
            },
            frame_kbytes: TruncGaussianParams {
                mean: 93.0,
                std: 10.0,
                lower: 46.0,
                upper: 140.0,
            },
            size_scale: 0.1,
            source_rate_label: "45Mbps".into(),
            pdb_ms: 10.0,
            discard_expired: true,
        }
    }
}

impl TrafficParams {
    /// Frame size law in bits after scaling.
    pub fn size_bits(&self) -> TruncGaussianParams {
        self.frame_kbytes.scaled(8000.0 * self.size_scale)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EsmKind {
    #[default]
    Eesm,
    Mmib,
}

/// EESM calibration factor per modulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EesmBeta {
    pub qpsk: f64,
    pub qam16: f64,
    pub qam64: f64,
    pub qam256: f64,
}

impl Default for EesmBeta {
    fn default() -> Self {
        Self {
            qpsk: 2.0,
            qam16: 6.0,
            qam64: 24.0,
            qam256: 80.0,
        }
    }
}

impl EesmBeta {
    pub fn for_order(&self, modulation_order: u8) -> f64 {
        match modulation_order {
            2 => self.qpsk,
            4 => self.qam16,
            6 => self.qam64,
            _ => self.qam256,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkParams {
    /// Replaces the built-in 28-entry table when present.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mcs_table: Option<McsTable>,
    pub esm: EsmKind,
    pub eesm_beta: EesmBeta,
    /// Needed for `esm = "mmib"`: one curve per modulation order in use.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub mi_curves: Vec<MiCurve>,
    /// CBs of the nominal full-band TB used to compute CQI reports.
    pub report_cbs: usize,
}

impl Default for LinkParams {
    fn default() -> Self {
        Self {
            mcs_table: None,
            esm: EsmKind::Eesm,
            eesm_beta: EesmBeta::default(),
            mi_curves: Vec::new(),
            report_cbs: 8,
        }
    }
}

impl LinkParams {
    pub fn table(&self) -> McsTable {
        self.mcs_table.clone().unwrap_or_default()
    }

    pub fn mi_curve(&self, modulation_order: u8) -> Option<&MiCurve> {
        self.mi_curves
            .iter()
            .find(|c| c.modulation_order() == modulation_order)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CqiParams {
    pub period_ms: f64,
    pub delay_ms: f64,
    /// TB error target of the baseline CQI.
    pub target_tbep: f64,
}

impl Default for CqiParams {
    fn default() -> Self {
        Self {
            period_ms: 2.0,
            delay_ms: 2.0,
            target_tbep: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HarqParams {
    /// First transmission plus retransmissions.
    pub max_attempts: u32,
}

impl Default for HarqParams {
    fn default() -> Self {
        Self { max_attempts: 4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CampaignParams {
    /// UEs per cell at each sweep point.
    pub loads: Vec<usize>,
    pub seeds: Vec<u64>,
    pub schemes: Vec<Scheme>,
    /// Concurrent runs; 0 uses every core.
    pub parallelism: usize,
}

impl Default for CampaignParams {
    fn default() -> Self {
        Self {
            loads: vec![1, 2, 3, 4, 5],
            seeds: vec![1, 2, 3],
            schemes: Scheme::ALL.to_vec(),
            parallelism: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub scheme: Scheme,
    pub seed: u64,
    pub horizon_ms: f64,
    /// Packets arriving earlier are left out of the KPIs.
    pub warmup_ms: f64,
    pub topology: TopologyParams,
    pub frame: FrameParams,
    pub carrier: CarrierParams,
    pub traffic: TrafficParams,
    pub link: LinkParams,
    pub cqi: CqiParams,
    pub harq: HarqParams,
    pub ecqi: EcqiConfig,
    pub olla: OllaParams,
    pub channel: ChannelParams,
    pub campaign: CampaignParams,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            scheme: Scheme::EcqiCbg,
            seed: 1,
            horizon_ms: 2000.0,
            warmup_ms: 100.0,
            topology: TopologyParams::default(),
            frame: FrameParams::default(),
            carrier: CarrierParams::default(),
            traffic: TrafficParams::default(),
            link: LinkParams::default(),
            cqi: CqiParams::default(),
            harq: HarqParams::default(),
            ecqi: EcqiConfig {
                n: 2,
                p: 0.9,
                ..EcqiConfig::default()
            },
            olla: OllaParams {
                cbg_target: Some(0.08),
                ..OllaParams::default()
            },
            channel: ChannelParams::default(),
            campaign: CampaignParams::default(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |f: &str, m: String| Err(Error::validation(f, m));
        if !(self.horizon_ms >= 1000.0 && self.horizon_ms.is_finite()) {
            return bad(
                "horizon_ms",
                format!("{} is shorter than 1 s", self.horizon_ms),
            );
        }
        if !(self.warmup_ms >= 0.0 && self.warmup_ms < self.horizon_ms) {
            return bad("warmup_ms", "must be in [0, horizon_ms)".into());
        }
        if self.topology.cells == 0 {
            return bad("topology.cells", "must be at least 1".into());
        }
        if self.topology.ues_per_cell == 0 {
            return bad("topology.ues_per_cell", "must be at least 1".into());
        }
        if !(self.topology.isd_m > 0.0 && self.topology.area_depth_m > 0.0) {
            return bad("topology.isd_m", "distances must be positive".into());
        }
        if !(self.frame.slot_ms > 0.0) {
            return bad("frame.slot_ms", "must be positive".into());
        }
        self.frame.pattern()?;
        if self.carrier.prbs == 0 {
            return bad("carrier.prbs", "must be at least 1".into());
        }
        if !(self.carrier.scs_khz > 0.0) {
            return bad("carrier.scs_khz", "must be positive".into());
        }
        let t = &self.traffic;
        if !(t.fps > 0.0 && t.fps.is_finite()) {
            return bad("traffic.fps", "must be positive".into());
        }
        if !(t.pdb_ms > 0.0) {
            return bad("traffic.pdb_ms", "must be positive".into());
        }
        if !(t.size_scale > 0.0) {
            return bad("traffic.size_scale", "must be positive".into());
        }
        t.jitter_ms
            .validate()
            .map_err(|e| Error::validation("traffic.jitter_ms", e.to_string()))?;
        t.frame_kbytes
            .validate()
            .map_err(|e| Error::validation("traffic.frame_kbytes", e.to_string()))?;
        if t.frame_kbytes.lower <= 0.0 {
            return bad(
                "traffic.frame_kbytes",
                "lower bound must be positive".into(),
            );
        }
        let l = &self.link;
        if l.report_cbs == 0 || l.report_cbs > self.carrier.prbs {
            return bad("link.report_cbs", "must be in 1..=carrier.prbs".into());
        }
        let b = &l.eesm_beta;
        if ![b.qpsk, b.qam16, b.qam64, b.qam256]
            .iter()
            .all(|v| *v > 0.0 && v.is_finite())
        {
            return bad("link.eesm_beta", "every factor must be positive".into());
        }
        if l.esm == EsmKind::Mmib {
            for e in l.table().entries() {
                if l.mi_curve(e.modulation_order).is_none() {
                    return bad(
                        "link.mi_curves",
                        format!("no curve for modulation order {}", e.modulation_order),
                    );
                }
            }
        }
        let c = &self.cqi;
        if !(c.period_ms > 0.0 && c.delay_ms >= 0.0) {
            return bad(
                "cqi.period_ms",
                "period must be positive and delay non-negative".into(),
            );
        }
        if !(c.target_tbep > 0.0 && c.target_tbep < 1.0) {
            return bad("cqi.target_tbep", "must be in (0, 1)".into());
        }
        if !(1..=4).contains(&self.harq.max_attempts) {
            return bad("harq.max_attempts", "must be in 1..=4".into());
        }
        let e = &self.ecqi;
        if e.n > e.max_cbgs {
            return bad("ecqi.n", format!("N exceeds M ({} > {})", e.n, e.max_cbgs));
        }
        e.validate()
            .map_err(|err| Error::validation("ecqi", err.to_string()))?;
        if e.n > l.report_cbs.min(e.max_cbgs) {
            return bad(
                "link.report_cbs",
                format!("report TB has fewer CBGs than N = {}", e.n),
            );
        }
        self.olla.validate()?;
        self.channel.validate()?;
        if self.campaign.loads.contains(&0) {
            return bad("campaign.loads", "loads must be at least 1".into());
        }
        Ok(())
    }

    /// Target CBG failure fraction of the per-CBG OLLA.
    pub fn cbg_olla_target(&self) -> f64 {
        self.olla
            .cbg_target
            .unwrap_or(self.ecqi.n as f64 / self.ecqi.max_cbgs as f64)
            .clamp(0.01, 0.99)
    }

    /// Canonical TOML of the fully resolved configuration.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::domain(format!("cannot serialize config: {e}")))
    }

    /// SHA-256 of [`SimConfig::to_toml`], hex encoded.
    pub fn hash(&self) -> Result<String> {
        let digest = Sha256::digest(self.to_toml()?.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn parse_error(text: &str, e: toml::de::Error) -> Error {
    Error::Parse {
        line: e.span().map_or(0, |s| line_of(text, s.start)),
        msg: e.message().to_string(),
    }
}

/// Parses `text`, applies `key.path=value` overrides and validates.
pub fn parse_config(text: &str, overrides: &[String]) -> Result<SimConfig> {
    let mut cfg: SimConfig = toml::from_str(text).map_err(|e| parse_error(text, e))?;
    if !overrides.is_empty() {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| parse_error(text, e))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        cfg = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Parse {
                line: 0,
                msg: format!("after overrides: {}", e.message()),
            })?;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Reads and parses a configuration file.
pub fn load_config(path: impl AsRef<Path>, overrides: &[String]) -> Result<SimConfig> {
    let text = std::fs::read_to_string(path.as_ref())
        .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
    parse_config(&text, overrides)
}

/// Sets `a.b.c=value` in `table`; the value is read as TOML, or as a bare
/// string when it is not valid TOML.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::validation(assignment, "override must look like key.path=value"))?;
    let keys: Vec<&str> = path.trim().split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(Error::validation(path, "empty key in override path"));
    }
    let raw = raw.trim();
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let mut cur = table;
    for k in &keys[..keys.len() - 1] {
        let entry = cur
            .entry(k.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::validation(path, format!("`{k}` is not a table")))?;
    }
    cur.insert(keys[keys.len() - 1].to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = parse_config("", &[]).unwrap();
        assert_eq!(cfg, SimConfig::default());
        assert_eq!(cfg.frame.pattern, "DDDSU");
    }

    #[test]
    fn n_above_m_names_the_field() {
        let err = parse_config("[ecqi]\nn = 9\nmax_cbgs = 8\n", &[]).unwrap_err();
        match &err {
            Error::Validation { field, msg } => {
                assert_eq!(field, "ecqi.n");
                assert!(msg.contains("N exceeds M"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_key_reports_line() {
        let err = parse_config("seed = 3\n\n[topology]\ncells = 3\nbogus = 1\n", &[]).unwrap_err();
        match err {
            Error::Parse { line, msg } => {
                assert_eq!(line, 5, "{msg}");
                assert!(msg.contains("bogus"), "{msg}");
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse_config("seed = [", &[]),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn overrides_take_precedence() {
        let cfg = parse_config(
            "seed = 3\n[ecqi]\nn = 2\n",
            &[
                "seed=7".into(),
                "ecqi.p=0.25".into(),
                "scheme=baseline_tb".into(),
                "topology.ues_per_cell=6".into(),
            ],
        )
        .unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.ecqi.n, 2);
        assert_eq!(cfg.ecqi.p, 0.25);
        assert_eq!(cfg.scheme, Scheme::BaselineTb);
        assert_eq!(cfg.topology.ues_per_cell, 6);
        assert!(parse_config("", &["nonsense".into()]).is_err());
        assert!(parse_config("", &["topology.nope=1".into()]).is_err());
    }

    #[test]
    fn hash_round_trip() {
        let cfg = SimConfig::default();
        let text = cfg.to_toml().unwrap();
        let back = parse_config(&text, &[]).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash().unwrap(), cfg.hash().unwrap());
        let mut other = cfg.clone();
        other.seed = 2;
        assert_ne!(other.hash().unwrap(), cfg.hash().unwrap());
    }

    #[test]
    fn validation_failures() {
        assert!(parse_config("horizon_ms = 500", &[]).is_err());
        assert!(parse_config("[frame]\npattern = \"DDDD\"", &[]).is_err());
        assert!(parse_config("[harq]\nmax_attempts = 5", &[]).is_err());
        assert!(parse_config("[link]\nesm = \"mmib\"", &[]).is_err());
    }
}
