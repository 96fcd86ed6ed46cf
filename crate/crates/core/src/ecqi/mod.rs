//! Baseline CQI and the enhanced CQI index.
//!
//! The enhanced index is the largest MCS `r` whose probability `Q(r)` of at
//! most (or exactly) `N` failed CBGs reaches the target `P`.

mod complexity;
mod search;

pub use complexity::{complexity_closed, complexity_direct};
pub use search::{
    search_binary, search_linear_asc, search_linear_desc, search_relaxed, ScanOrder, SearchOutcome,
};

use serde::{Deserialize, Serialize};

use crate::link::{cbg_error_vector, CbSinrProfile, McsTable};
use crate::prob::{
    closed_form_at_most, closed_form_error_bound, closed_form_n_failed_counted,
    direct_n_failed_counted, poisson_binomial_prefix_counted, Counted, MAX_CBGS, MAX_CLOSED_FORM_N,
};
use crate::{Error, Result};

/// Closed-form results are only trusted when their error bound is below this.
pub const CLOSED_FORM_TOLERANCE: f64 = 1e-12;

/// Which event `Q(r)` measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EcqiMode {
    /// `P(n_e <= N)`.
    #[default]
    AtMostN,
    /// `P(n_e = N)`.
    ExactlyN,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchStrategy {
    LinearAsc,
    LinearDesc,
    #[default]
    Binary,
    /// Accept the first index whose `Q` lies within `delta_p` of the target.
    Relaxed {
        delta_p: f64,
        order: ScanOrder,
    },
}

/// How `Q(r)` is computed from the CBG error probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbabilityMethod {
    /// Odds closed form for `N <= 3`, recursion otherwise or when the
    /// closed form is ill-conditioned.
    #[default]
    ClosedForm,
    /// Sum over every failing subset.
    Direct,
    /// Poisson-binomial recursion.
    Recursion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EcqiConfig {
    /// Tolerated failed CBGs.
    pub n: usize,
    /// Configured maximum CBGs per TB.
    pub max_cbgs: usize,
    /// Target probability.
    pub p: f64,
    #[serde(default)]
    pub mode: EcqiMode,
    #[serde(default)]
    pub search: SearchStrategy,
    #[serde(default)]
    pub method: ProbabilityMethod,
    /// Scan every index first and fall back to a linear search if `Q` is
    /// not monotone. Evaluations made by the check are not counted.
    /// Defaults to on in debug builds.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub validate_monotone: Option<bool>,
}

impl Default for EcqiConfig {
    fn default() -> Self {
        Self {
            n: 4,
            max_cbgs: 8,
            p: 0.5,
            mode: EcqiMode::AtMostN,
            search: SearchStrategy::Binary,
            method: ProbabilityMethod::ClosedForm,
            validate_monotone: None,
        }
    }
}

impl EcqiConfig {
    pub fn validate(&self) -> Result<()> {
        if ![2, 4, 6, 8].contains(&self.max_cbgs) {
            return Err(Error::domain(format!(
                "max CBGs must be one of 2, 4, 6, 8, got {}",
                self.max_cbgs
            )));
        }
        if self.n > self.max_cbgs {
            return Err(Error::domain(format!(
                "N exceeds M ({} > {})",
                self.n, self.max_cbgs
            )));
        }
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(Error::domain(format!("P = {} is not in (0, 1)", self.p)));
        }
        if let SearchStrategy::Relaxed { delta_p, .. } = self.search {
            if !(delta_p >= 0.0 && delta_p.is_finite()) {
                return Err(Error::domain(format!("delta_p = {delta_p} must be >= 0")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SearchStats {
    /// MCS indices whose `Q` was evaluated.
    pub mcs_evaluations: usize,
    /// Multiplications spent computing `Q`.
    pub multiplications: u64,
    /// Evaluations where the closed form was replaced by the recursion.
    pub fallbacks: usize,
}

/// A CQI report with its out-of-range flag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CqiReport {
    pub index: usize,
    /// No MCS met the target; `index` is 0.
    pub out_of_range: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EcqiReport {
    pub index: usize,
    pub out_of_range: bool,
    /// The monotonicity check failed and a linear search was used instead.
    pub non_monotone: bool,
    pub stats: SearchStats,
}

/// Largest MCS whose TB error probability at `wideband_sinr_db`, over
/// `num_cbs` CBs, is below `target_tbep`.
pub fn baseline_cqi(
    wideband_sinr_db: f64,
    table: &McsTable,
    target_tbep: f64,
    num_cbs: usize,
) -> CqiReport {
    let c = num_cbs.max(1) as f64;
    let found = table.entries().iter().rposition(|e| {
        let p_cb = e.bler(wideband_sinr_db);
        // 1 - (1 - p)^C without cancellation.
        let tbep = -(c * (-p_cb).ln_1p()).exp_m1();
        tbep < target_tbep
    });
    CqiReport {
        index: found.unwrap_or(0),
        out_of_range: found.is_none(),
    }
}

/// `Q(r)` for one MCS entry with its multiplication count.
pub fn evaluate_q(
    profile: &CbSinrProfile,
    table: &McsTable,
    index: usize,
    cfg: &EcqiConfig,
    stats: &mut SearchStats,
) -> Result<f64> {
    let entry = table
        .get(index)
        .ok_or_else(|| Error::domain(format!("MCS index {index} out of table")))?;
    let probs = cbg_error_vector(profile, entry)?;
    let n = cfg.n;
    let at_most = cfg.mode == EcqiMode::AtMostN;
    let recursion = |stats: &mut SearchStats| {
        let Counted {
            value,
            multiplications,
        } = poisson_binomial_prefix_counted(probs.as_slice(), n);
        stats.multiplications += multiplications;
        if at_most {
            value.iter().sum::<f64>().min(1.0)
        } else {
            value[n]
        }
    };
    let q = match cfg.method {
        ProbabilityMethod::Recursion => recursion(stats),
        ProbabilityMethod::ClosedForm => {
            let odds = probs.odds()?;
            if n > MAX_CLOSED_FORM_N || closed_form_error_bound(&odds, n) > CLOSED_FORM_TOLERANCE {
                stats.fallbacks += 1;
                recursion(stats)
            } else {
                let c = if at_most {
                    closed_form_at_most(&odds, n)?
                } else {
                    closed_form_n_failed_counted(&odds, n)?
                };
                stats.multiplications += c.multiplications;
                c.value
            }
        }
        ProbabilityMethod::Direct => {
            let terms = if at_most { 0..=n } else { n..=n };
            let mut total = 0.0;
            for i in terms {
                let c = direct_n_failed_counted(&probs, i)?;
                stats.multiplications += c.multiplications;
                total += c.value;
            }
            total.min(1.0)
        }
    };
    stats.mcs_evaluations += 1;
    Ok(q)
}

/// Enhanced CQI: the largest MCS index with `Q(r) >= P`.
pub fn ecqi(profile: &CbSinrProfile, table: &McsTable, cfg: &EcqiConfig) -> Result<EcqiReport> {
    cfg.validate()?;
    let m = profile.layout().num_cbgs();
    if m > cfg.max_cbgs.min(MAX_CBGS) {
        return Err(Error::domain(format!(
            "profile has {m} CBGs, more than the configured {}",
            cfg.max_cbgs
        )));
    }
    if cfg.n > m {
        return Err(Error::domain(format!("N exceeds M ({} > {m})", cfg.n)));
    }

    let len = table.len();
    let mut stats = SearchStats::default();
    let mut failure = None;
    let mut non_monotone = false;

    let mut strategy = cfg.search;
    let bisects = matches!(
        cfg.search,
        SearchStrategy::Binary
            | SearchStrategy::Relaxed {
                order: ScanOrder::Binary,
                ..
            }
    );
    if cfg.validate_monotone.unwrap_or(cfg!(debug_assertions)) && bisects {
        let mut scratch = SearchStats::default();
        let mut prev = f64::INFINITY;
        for r in 0..len {
            let q = evaluate_q(profile, table, r, cfg, &mut scratch)?;
            if q > prev + 1e-12 {
                non_monotone = true;
                log::warn!("Q is not monotone at MCS {r}: {prev} -> {q}; using a linear search");
                strategy = SearchStrategy::LinearDesc;
                break;
            }
            prev = q;
        }
    }

    let mut q = |r: usize| match evaluate_q(profile, table, r, cfg, &mut stats) {
        Ok(v) => v,
        Err(e) => {
            failure.get_or_insert(e);
            f64::NEG_INFINITY
        }
    };
    let outcome = match strategy {
        SearchStrategy::LinearAsc => search_linear_asc(len, cfg.p, &mut q),
        SearchStrategy::LinearDesc => search_linear_desc(len, cfg.p, &mut q),
        SearchStrategy::Binary => search_binary(len, cfg.p, &mut q),
        SearchStrategy::Relaxed { delta_p, order } => {
            search_relaxed(len, cfg.p, delta_p, order, &mut q)
        }
    };
    if let Some(e) = failure {
        return Err(e);
    }
    debug_assert_eq!(outcome.evaluations, stats.mcs_evaluations);
    Ok(EcqiReport {
        index: outcome.reported(),
        out_of_range: outcome.index.is_none(),
        non_monotone,
        stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(n: usize, p: f64, search: SearchStrategy) -> EcqiConfig {
        EcqiConfig {
            n,
            max_cbgs: 8,
            p,
            search,
            ..EcqiConfig::default()
        }
    }

    #[test]
    fn baseline_extremes() {
        let t = McsTable::default();
        assert_eq!(
            baseline_cqi(-60.0, &t, 0.1, 1),
            CqiReport {
                index: 0,
                out_of_range: true
            }
        );
        assert_eq!(baseline_cqi(80.0, &t, 0.1, 1).index, t.len() - 1);
        let k = 10;
        let mid = t.get(k).unwrap().bler_midpoint_db;
        assert!(baseline_cqi(mid, &t, 0.1, 1).index < k);
    }

    #[test]
    fn config_validation() {
        let mut c = EcqiConfig::default();
        assert!(c.validate().is_ok());
        c.n = 9;
        assert!(c
            .validate()
            .unwrap_err()
            .to_string()
            .contains("N exceeds M (9 > 8)"));
        let mut c = EcqiConfig {
            p: 1.0,
            ..EcqiConfig::default()
        };
        assert!(c.validate().is_err());
        c.p = 0.5;
        c.max_cbgs = 3;
        assert!(c.validate().is_err());
        c.max_cbgs = 4;
        c.search = SearchStrategy::Relaxed {
            delta_p: -0.1,
            order: ScanOrder::Binary,
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn strategies_agree_on_flat_profile() {
        let t = McsTable::default();
        for sinr in [-20.0, 0.0, 7.5, 15.0, 40.0] {
            let prof = CbSinrProfile::flat(sinr, 8, 8).unwrap();
            let idx: Vec<usize> = [
                SearchStrategy::LinearAsc,
                SearchStrategy::LinearDesc,
                SearchStrategy::Binary,
            ]
            .into_iter()
            .map(|s| ecqi(&prof, &t, &cfg(2, 0.9, s)).unwrap().index)
            .collect();
            assert!(idx.iter().all(|&i| i == idx[0]), "{sinr}: {idx:?}");
        }
    }

    #[test]
    fn methods_agree() {
        let t = McsTable::default();
        let prof = CbSinrProfile::new(
            (0..8).map(|i| 8.0 + i as f64 * 0.7).collect(),
            crate::link::CbgLayout::new(8, 8).unwrap(),
        )
        .unwrap();
        for mode in [EcqiMode::AtMostN, EcqiMode::ExactlyN] {
            for n in 0..=3 {
                let mut reports = vec![];
                for method in [
                    ProbabilityMethod::ClosedForm,
                    ProbabilityMethod::Direct,
                    ProbabilityMethod::Recursion,
                ] {
                    let c = EcqiConfig {
                        n,
                        mode,
                        method,
                        p: 0.3,
                        search: SearchStrategy::LinearDesc,
                        ..EcqiConfig::default()
                    };
                    reports.push(ecqi(&prof, &t, &c).unwrap().index);
                }
                assert!(reports.iter().all(|&i| i == reports[0]), "{mode:?} {n}");
            }
        }
    }

    #[test]
    fn n_zero_single_cbg_matches_baseline() {
        let t = McsTable::default();
        for i in 0..200 {
            let sinr = -15.0 + i as f64 * 0.3;
            for c in [1, 3, 8] {
                let prof = CbSinrProfile::flat(sinr, c, 1).unwrap();
                let e = ecqi(&prof, &t, &cfg(0, 0.9, SearchStrategy::Binary)).unwrap();
                let b = baseline_cqi(sinr, &t, 0.1, c);
                assert_eq!(e.index, b.index, "sinr {sinr} c {c}");
            }
        }
    }

    #[test]
    fn closed_form_counts_on_engine_path() {
        let t = McsTable::default();
        let prof = CbSinrProfile::flat(10.0, 8, 8).unwrap();
        for n in 1..=3 {
            let mut stats = SearchStats::default();
            let c = EcqiConfig {
                n,
                mode: EcqiMode::ExactlyN,
                ..EcqiConfig::default()
            };
            evaluate_q(&prof, &t, 12, &c, &mut stats).unwrap();
            assert_eq!(stats.fallbacks, 0);
            assert_eq!(stats.multiplications, complexity_closed(8, n).unwrap());
        }
    }

    #[test]
    fn n_above_m_is_rejected() {
        let t = McsTable::default();
        let prof = CbSinrProfile::flat(10.0, 2, 2).unwrap();
        assert!(ecqi(&prof, &t, &cfg(3, 0.9, SearchStrategy::Binary)).is_err());
    }
}
