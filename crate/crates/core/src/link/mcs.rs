use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One modulation and coding scheme with its logistic BLER curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McsEntry {
    pub index: usize,
    /// Bits per modulation symbol: 2, 4, 6 or 8.
    pub modulation_order: u8,
    pub code_rate: f64,
    /// Information bits per resource element.
    pub spectral_efficiency: f64,
    /// SINR (dB) at which the CB error probability is one half.
    pub bler_midpoint_db: f64,
    /// Steepness of the curve in dB^-1.
    pub bler_slope: f64,
}

impl McsEntry {
    /// CB error probability at `sinr_db` on this MCS.
    pub fn bler(&self, sinr_db: f64) -> f64 {
        bler(sinr_db, self)
    }

    /// SINR (dB) at which the CB error probability equals `target`.
    pub fn sinr_for_bler(&self, target: f64) -> f64 {
        self.bler_midpoint_db + ((1.0 - target) / target).ln() / self.bler_slope
    }
}

/// Logistic CB error probability, `1 / (1 + exp(slope * (sinr - midpoint)))`.
pub fn bler(sinr_db: f64, entry: &McsEntry) -> f64 {
    let x = entry.bler_slope * (sinr_db - entry.bler_midpoint_db);
    // Split on sign so exp never overflows.
    if x >= 0.0 {
        let e = (-x).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + x.exp())
    }
}

/// Ordered list of MCS entries.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct McsTable {
    entries: Vec<McsEntry>,
}

/// Grid on which adjacent-entry BLER ordering is verified at load time.
const VALIDATION_GRID_DB: (f64, f64, f64) = (-30.0, 60.0, 0.25);

impl McsTable {
    pub fn new(entries: Vec<McsEntry>) -> Result<Self> {
        let field = |i: usize, f: &str| format!("link.mcs[{i}].{f}");
        if entries.len() < 2 {
            return Err(Error::validation(
                "link.mcs",
                "need at least two MCS entries",
            ));
        }
        for (i, e) in entries.iter().enumerate() {
            if e.index != i {
                return Err(Error::validation(
                    field(i, "index"),
                    "indices must be contiguous from 0",
                ));
            }
            if ![2, 4, 6, 8].contains(&e.modulation_order) {
                return Err(Error::validation(
                    field(i, "modulation_order"),
                    "must be 2, 4, 6 or 8",
                ));
            }
            if !(e.code_rate > 0.0 && e.code_rate < 1.0) {
                return Err(Error::validation(
                    field(i, "code_rate"),
                    "must lie in (0, 1)",
                ));
            }
            if !(e.spectral_efficiency.is_finite() && e.spectral_efficiency > 0.0) {
                return Err(Error::validation(
                    field(i, "spectral_efficiency"),
                    "must be positive",
                ));
            }
            if !(e.bler_slope.is_finite() && e.bler_slope > 0.0) {
                return Err(Error::validation(
                    field(i, "bler_slope"),
                    "must be positive",
                ));
            }
            if !e.bler_midpoint_db.is_finite() {
                return Err(Error::validation(
                    field(i, "bler_midpoint_db"),
                    "must be finite",
                ));
            }
        }
        for (i, w) in entries.windows(2).enumerate() {
            if w[1].spectral_efficiency <= w[0].spectral_efficiency {
                return Err(Error::validation(
                    field(i + 1, "spectral_efficiency"),
                    "entries must be strictly ordered by spectral efficiency",
                ));
            }
            if w[1].bler_midpoint_db <= w[0].bler_midpoint_db {
                return Err(Error::validation(
                    field(i + 1, "bler_midpoint_db"),
                    "midpoints must increase strictly with the index",
                ));
            }
            let (lo, hi, step) = VALIDATION_GRID_DB;
            let steps = ((hi - lo) / step) as usize;
            for k in 0..=steps {
                let s = lo + k as f64 * step;
                if bler(s, &w[0]) > bler(s, &w[1]) {
                    return Err(Error::validation(
                        field(i + 1, "bler_slope"),
                        format!("BLER of MCS {} drops below MCS {} at {s} dB", i + 1, i),
                    ));
                }
            }
        }
        Ok(Self { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<&McsEntry> {
        self.entries.get(index)
    }

    pub fn entries(&self) -> &[McsEntry] {
        &self.entries
    }

    /// Largest index whose midpoint does not exceed `midpoint_db`, else 0.
    pub fn index_at_or_below(&self, midpoint_db: f64) -> usize {
        self.entries
            .iter()
            .rposition(|e| e.bler_midpoint_db <= midpoint_db)
            .unwrap_or(0)
    }
}

impl<'de> Deserialize<'de> for McsTable {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let entries = Vec::<McsEntry>::deserialize(d)?;
        McsTable::new(entries).map_err(serde::de::Error::custom)
    }
}

impl Default for McsTable {
    fn default() -> Self {
        McsTable::new(default_entries()).expect("default MCS table is valid")
    }
}

/// `(modulation order, code rate)` of the 28 default entries, QPSK to 256QAM.
const DEFAULT_MODCODS: [(u8, f64); 28] = [
    (2, 0.08),
    (2, 0.12),
    (2, 0.19),
    (2, 0.30),
    (2, 0.44),
    (2, 0.59),
    (4, 0.37),
    (4, 0.42),
    (4, 0.48),
    (4, 0.54),
    (4, 0.60),
    (4, 0.64),
    (6, 0.46),
    (6, 0.50),
    (6, 0.55),
    (6, 0.60),
    (6, 0.65),
    (6, 0.70),
    (6, 0.75),
    (6, 0.80),
    (6, 0.85),
    (8, 0.67),
    (8, 0.69),
    (8, 0.74),
    (8, 0.78),
    (8, 0.82),
    (8, 0.86),
    (8, 0.93),
];

pub const DEFAULT_FIRST_MIDPOINT_DB: f64 = -7.0;
pub const DEFAULT_MIDPOINT_SPACING_DB: f64 = 1.9;
pub const DEFAULT_BLER_SLOPE: f64 = 2.0;

fn default_entries() -> Vec<McsEntry> {
    DEFAULT_MODCODS
        .iter()
        .enumerate()
        .map(|(index, &(q, r))| McsEntry {
            index,
            modulation_order: q,
            code_rate: r,
            spectral_efficiency: q as f64 * r,
            bler_midpoint_db: DEFAULT_FIRST_MIDPOINT_DB
                + DEFAULT_MIDPOINT_SPACING_DB * index as f64,
            bler_slope: DEFAULT_BLER_SLOPE,
        })
        .collect()
}
