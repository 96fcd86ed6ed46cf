//! Outer-loop link adaptation offsets.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OllaMode {
    /// One step per TB from its single ACK/NACK.
    TbOlla,
    /// One scaled step per CBG bit.
    CbgEolla,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OllaParams {
    pub initial_db: f64,
    pub min_db: f64,
    pub max_db: f64,
    /// Target first-transmission TB error rate.
    pub tb_target: f64,
    pub step_down_db: f64,
    /// Target CBG failure fraction; `N / M` of the eCQI setting if absent.
    pub cbg_target: Option<f64>,
    /// Step per TB when every CBG is acknowledged.
    pub cbg_step_down_db: f64,
}

impl Default for OllaParams {
    fn default() -> Self {
        Self {
            initial_db: 0.0,
            min_db: -25.0,
            max_db: 15.0,
            tb_target: 0.1,
            step_down_db: 0.1,
            cbg_target: None,
            cbg_step_down_db: 0.1,
        }
    }
}

impl OllaParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |f: &str, m: &str| Err(Error::validation(format!("olla.{f}"), m));
        if !(self.min_db <= self.initial_db && self.initial_db <= self.max_db) {
            return bad("initial_db", "must lie within [min_db, max_db]");
        }
        if !(self.tb_target > 0.0 && self.tb_target < 1.0) {
            return bad("tb_target", "must be in (0, 1)");
        }
        if let Some(t) = self.cbg_target {
            if !(t > 0.0 && t < 1.0) {
                return bad("cbg_target", "must be in (0, 1)");
            }
        }
        if !(self.step_down_db > 0.0) {
            return bad("step_down_db", "must be positive");
        }
        if !(self.cbg_step_down_db > 0.0) {
            return bad("cbg_step_down_db", "must be positive");
        }
        Ok(())
    }
}

/// New offset after the feedback `acks` of a first transmission.
///
/// A positive offset makes MCS selection more conservative. With
/// `up / down = (1 - t) / t`, the offset is stationary exactly when the
/// error rate equals `t`.
pub fn olla_update(
    offset_db: f64,
    acks: &[bool],
    mode: OllaMode,
    params: &OllaParams,
    cbg_target: f64,
) -> f64 {
    let next = match mode {
        OllaMode::TbOlla => {
            let t = params.tb_target;
            if acks.iter().all(|&a| a) {
                offset_db - params.step_down_db
            } else {
                offset_db + params.step_down_db * (1.0 - t) / t
            }
        }
        OllaMode::CbgEolla => {
            let t = cbg_target;
            let m = acks.len().max(1) as f64;
            let down = params.cbg_step_down_db / m;
            let up = down * (1.0 - t) / t;
            acks.iter()
                .fold(offset_db, |o, &a| if a { o - down } else { o + up })
        }
    };
    next.clamp(params.min_db, params.max_db)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tb_steps_and_clamp() {
        let p = OllaParams::default();
        let o = olla_update(0.0, &[true, true], OllaMode::TbOlla, &p, 0.5);
        assert!((o + p.step_down_db).abs() < 1e-15);
        let o = olla_update(0.0, &[true, false], OllaMode::TbOlla, &p, 0.5);
        assert!((o - 0.9).abs() < 1e-12);
        assert_eq!(olla_update(15.0, &[false], OllaMode::TbOlla, &p, 0.5), 15.0);
        assert_eq!(
            olla_update(-25.0, &[true], OllaMode::TbOlla, &p, 0.5),
            -25.0
        );
    }

    #[test]
    fn cbg_steps_balance_at_target() {
        let p = OllaParams::default();
        // Two of eight CBGs failed with a target of 1/4: no net move.
        let acks = [false, false, true, true, true, true, true, true];
        let o = olla_update(1.0, &acks, OllaMode::CbgEolla, &p, 0.25);
        assert!((o - 1.0).abs() < 1e-12);
        let all = [true; 8];
        let o = olla_update(1.0, &all, OllaMode::CbgEolla, &p, 0.25);
        assert!((o - (1.0 - p.cbg_step_down_db)).abs() < 1e-12);
    }
}
