//! Exhaustive enumeration of ACK/NACK outcomes.
//!
//! This is the reference the other routes are checked against. It shares no
//! code with them: every one of the `2^M` outcomes is weighed explicitly.

use super::CbgErrorVector;
use crate::error::{Error, Result};

/// Enumeration is exponential in `M`; refuse beyond this.
pub const MAX_ENUMERATION_CBGS: usize = 20;

/// Full pmf of `n_e` by summing all `2^M` outcome probabilities.
pub fn brute_force_distribution(probs: &CbgErrorVector) -> Result<Vec<f64>> {
    let p = probs.as_slice();
    let m = p.len();
    if m > MAX_ENUMERATION_CBGS {
        return Err(Error::Capacity {
            what: "CBG count for enumeration",
            got: m,
            limit: MAX_ENUMERATION_CBGS,
        });
    }
    let mut pmf = vec![0.0; m + 1];
    for outcome in 0u32..(1u32 << m) {
        let mut weight = 1.0;
        for (bit, &pm) in p.iter().enumerate() {
            weight *= if outcome >> bit & 1 == 1 {
                pm
            } else {
                1.0 - pm
            };
        }
        pmf[outcome.count_ones() as usize] += weight;
    }
    Ok(pmf)
}

/// `P(exactly n failures)` by enumeration.
pub fn brute_force_n_failed(probs: &CbgErrorVector, n: usize) -> Result<f64> {
    if n > probs.len() {
        return Err(Error::domain(format!(
            "N = {n} exceeds M = {}",
            probs.len()
        )));
    }
    Ok(brute_force_distribution(probs)?[n])
}
