//! Channel quality to CB error probability: MCS table, BLER curves,
//! effective SINR and CB grouping.

mod effective;
mod layout;
mod mcs;

pub use effective::{db_to_linear, effective_sinr, linear_to_db, EsmMethod, MiCurve};
pub use layout::CbgLayout;
pub use mcs::{
    bler, McsEntry, McsTable, DEFAULT_BLER_SLOPE, DEFAULT_FIRST_MIDPOINT_DB,
    DEFAULT_MIDPOINT_SPACING_DB,
};

use crate::error::{Error, Result};
use crate::prob::{cbg_error_prob_general, CbgErrorVector};

/// CB error probabilities are kept inside `[PROB_CLAMP, 1 - PROB_CLAMP]`.
pub const PROB_CLAMP: f64 = 1e-12;

/// Effective SINR of every CB of a transport block and its CBG grouping.
#[derive(Debug, Clone, PartialEq)]
pub struct CbSinrProfile {
    per_cb_sinr_db: Vec<f64>,
    layout: CbgLayout,
}

impl CbSinrProfile {
    pub fn new(per_cb_sinr_db: Vec<f64>, layout: CbgLayout) -> Result<Self> {
        if per_cb_sinr_db.len() != layout.num_cbs() {
            return Err(Error::domain(format!(
                "{} CB SINRs for a layout of {} CBs",
                per_cb_sinr_db.len(),
                layout.num_cbs()
            )));
        }
        if per_cb_sinr_db.iter().any(|s| s.is_nan()) {
            return Err(Error::domain("CB SINR is NaN"));
        }
        Ok(Self {
            per_cb_sinr_db,
            layout,
        })
    }

    /// Profile where every CB sees `sinr_db`, grouped into `num_cbgs` CBGs.
    pub fn flat(sinr_db: f64, num_cbs: usize, num_cbgs: usize) -> Result<Self> {
        Self::new(vec![sinr_db; num_cbs], CbgLayout::new(num_cbs, num_cbgs)?)
    }

    pub fn per_cb_sinr_db(&self) -> &[f64] {
        &self.per_cb_sinr_db
    }

    pub fn layout(&self) -> &CbgLayout {
        &self.layout
    }

    /// The same profile with every CB SINR shifted by `delta_db`.
    pub fn shifted(&self, delta_db: f64) -> Self {
        Self {
            per_cb_sinr_db: self.per_cb_sinr_db.iter().map(|s| s + delta_db).collect(),
            layout: self.layout.clone(),
        }
    }
}

/// Error probability of every CB on `entry`, clamped away from 0 and 1.
pub fn cb_error_probs(profile: &CbSinrProfile, entry: &McsEntry) -> Vec<f64> {
    profile
        .per_cb_sinr_db
        .iter()
        .map(|&s| bler(s, entry).clamp(PROB_CLAMP, 1.0 - PROB_CLAMP))
        .collect()
}

/// Per-CBG error probabilities on `entry`, clamped away from 0 and 1.
pub fn cbg_error_vector(profile: &CbSinrProfile, entry: &McsEntry) -> Result<CbgErrorVector> {
    let cb = cb_error_probs(profile, entry);
    let probs = profile
        .layout
        .ranges()
        .map(|r| cbg_error_prob_general(&cb[r]).map(|p| p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)))
        .collect::<Result<Vec<_>>>()?;
    CbgErrorVector::new(probs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cb_probs_examples() {
        let t = McsTable::default();
        let e = t.get(7).unwrap();
        let p = CbSinrProfile::flat(e.bler_midpoint_db, 6, 3).unwrap();
        assert!(cb_error_probs(&p, e).iter().all(|&v| v == 0.5));

        let mono = CbSinrProfile::new(
            vec![0.0, 2.0, 5.0, 9.0, 14.0],
            CbgLayout::new(5, 2).unwrap(),
        )
        .unwrap();
        let probs = cb_error_probs(&mono, e);
        assert!(probs.windows(2).all(|w| w[1] <= w[0]));

        let inf = CbSinrProfile::new(
            vec![e.bler_midpoint_db, f64::INFINITY],
            CbgLayout::new(2, 2).unwrap(),
        )
        .unwrap();
        assert_eq!(cb_error_probs(&inf, e)[1], PROB_CLAMP);
    }

    #[test]
    fn cbg_vector_groups_cbs() {
        let t = McsTable::default();
        let e = t.get(3).unwrap();
        let p = CbSinrProfile::flat(e.bler_midpoint_db, 3, 2).unwrap();
        let v = cbg_error_vector(&p, e).unwrap();
        assert_eq!(v.len(), 2);
        assert!((v.as_slice()[0] - 0.75).abs() < 1e-15);
        assert!((v.as_slice()[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn profile_validation() {
        assert!(CbSinrProfile::new(vec![1.0, 2.0], CbgLayout::new(3, 1).unwrap()).is_err());
        assert!(CbSinrProfile::new(vec![f64::NAN], CbgLayout::new(1, 1).unwrap()).is_err());
    }
}
