//! Failed-CBG count distributions.
//!
//! A transport block is split into `M` code block groups, each of which fails
//! independently (or, in [`CorrelatedModel`], with a common correlation). The
//! functions here compute the law of the number of failed CBGs `n_e` through
//! several independent routes:
//!
//! * binomial sums for identical CBGs,
//! * a Poisson-binomial convolution for non-identical CBGs,
//! * closed forms in the odds domain for `N <= 3` ([`closed_form`]),
//! * exhaustive enumeration ([`oracle`]), used as the reference.

mod closed_form;
mod dd;
pub mod oracle;

pub use closed_form::{
    closed_form_at_most, closed_form_error_bound, closed_form_n_failed,
    closed_form_n_failed_counted, direct_n_failed_counted, poisson_binomial_prefix_counted,
    Counted, MAX_CLOSED_FORM_N,
};
pub use oracle::{brute_force_distribution, brute_force_n_failed, MAX_ENUMERATION_CBGS};

use crate::error::{check_probability, Error, Result};

/// Largest number of CBGs per transport block on the PDSCH.
pub const MAX_CBGS: usize = 8;

/// Per-CBG error probabilities of one transport block at one MCS.
#[derive(Debug, Clone, PartialEq)]
pub struct CbgErrorVector {
    probs: Vec<f64>,
}

impl CbgErrorVector {
    /// Builds a vector of `1..=MAX_CBGS` probabilities.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        Self::with_limit(probs, MAX_CBGS)
    }

    /// Same as [`CbgErrorVector::new`] with a caller-chosen upper bound on `M`.
    pub fn with_limit(probs: Vec<f64>, limit: usize) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::domain("a CBG error vector needs at least one CBG"));
        }
        if probs.len() > limit {
            return Err(Error::Capacity {
                what: "CBG count",
                got: probs.len(),
                limit,
            });
        }
        for &p in &probs {
            check_probability("CBG error probability", p)?;
        }
        Ok(Self { probs })
    }

    /// Builds a vector of `m` identical probabilities.
    pub fn identical(p: f64, m: usize) -> Result<Self> {
        Self::new(vec![p; m])
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    /// Clamps every probability into `[eps, 1 - eps]`.
    pub fn clamped(&self, eps: f64) -> Self {
        Self {
            probs: self.probs.iter().map(|p| p.clamp(eps, 1.0 - eps)).collect(),
        }
    }

    pub fn odds(&self) -> Result<OddsVector> {
        OddsVector::from_probs(self)
    }
}

/// Odds ratios `O_m = p_m / (1 - p_m)` of a [`CbgErrorVector`].
#[derive(Debug, Clone, PartialEq)]
pub struct OddsVector {
    odds: Vec<f64>,
}

impl OddsVector {
    pub fn from_probs(probs: &CbgErrorVector) -> Result<Self> {
        let odds = probs
            .as_slice()
            .iter()
            .map(|&p| odds(p))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { odds })
    }

    /// Wraps raw odds values; each must be finite and non-negative.
    pub fn from_odds(odds: Vec<f64>) -> Result<Self> {
        if odds.is_empty() {
            return Err(Error::domain("an odds vector needs at least one entry"));
        }
        if let Some(o) = odds.iter().find(|o| !(o.is_finite() && **o >= 0.0)) {
            return Err(Error::domain(format!("odds {o} must be finite and >= 0")));
        }
        Ok(Self { odds })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.odds
    }

    pub fn len(&self) -> usize {
        self.odds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.odds.is_empty()
    }

    /// Maps back to probabilities with `p = O / (1 + O)`.
    pub fn to_probs(&self) -> Vec<f64> {
        self.odds.iter().map(|o| o / (1.0 + o)).collect()
    }
}

/// Law of the number of failed CBGs, indexed by `n_e = 0..=M`.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorCountDistribution {
    pmf: Vec<f64>,
}

impl ErrorCountDistribution {
    /// Poisson-binomial law of independent, non-identical CBG failures.
    pub fn from_probs(probs: &CbgErrorVector) -> Self {
        Self {
            pmf: poisson_binomial(probs.as_slice()),
        }
    }

    pub fn from_pmf(pmf: Vec<f64>) -> Result<Self> {
        if pmf.is_empty() {
            return Err(Error::domain("empty pmf"));
        }
        for &v in &pmf {
            check_probability("pmf entry", v)?;
        }
        let total: f64 = pmf.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::domain(format!("pmf sums to {total}, not 1")));
        }
        Ok(Self { pmf })
    }

    /// Number of CBGs `M`.
    pub fn cbgs(&self) -> usize {
        self.pmf.len() - 1
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    pub fn exactly(&self, n: usize) -> Result<f64> {
        self.pmf
            .get(n)
            .copied()
            .ok_or_else(|| Error::domain(format!("N = {n} exceeds M = {}", self.cbgs())))
    }

    /// `P(n_e <= n)`.
    pub fn at_most(&self, n: usize) -> Result<f64> {
        if n > self.cbgs() {
            return Err(Error::domain(format!(
                "N = {n} exceeds M = {}",
                self.cbgs()
            )));
        }
        Ok(self.pmf[..=n].iter().sum::<f64>().min(1.0))
    }

    pub fn cdf(&self) -> Vec<f64> {
        self.pmf
            .iter()
            .scan(0.0, |acc, p| {
                *acc += p;
                Some(f64::min(*acc, 1.0))
            })
            .collect()
    }
}

/// Equicorrelated CBG failures: a binomial/two-point mixture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelatedModel {
    p: f64,
    rho: f64,
    m: usize,
}

impl CorrelatedModel {
    pub fn new(p: f64, rho: f64, m: usize) -> Result<Self> {
        check_probability("p", p)?;
        if !(rho.is_finite() && (0.0..=1.0).contains(&rho)) {
            return Err(Error::domain(format!("correlation {rho} not in [0, 1]")));
        }
        if m == 0 {
            return Err(Error::domain("M must be at least 1"));
        }
        Ok(Self { p, rho, m })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn cbgs(&self) -> usize {
        self.m
    }

    pub fn pmf(&self) -> Vec<f64> {
        (0..=self.m).map(|n| correlated_term(self, n)).collect()
    }
}

fn correlated_term(model: &CorrelatedModel, n: usize) -> f64 {
    let CorrelatedModel { p, rho, m } = *model;
    // Modified Bernoulli: all M CBGs fail together with probability p.
    let two_point = if n == 0 {
        1.0 - p
    } else if n == m {
        p
    } else {
        0.0
    };
    (1.0 - rho) * binomial_pmf(m, n, p) + rho * two_point
}

/// `P(exactly n of M CBGs fail)` under [`CorrelatedModel`].
pub fn correlated_pmf(model: &CorrelatedModel, n: usize) -> Result<f64> {
    if n > model.m {
        return Err(Error::domain(format!("N = {n} exceeds M = {}", model.m)));
    }
    Ok(correlated_term(model, n))
}

/// Binomial coefficient as an exact integer.
pub fn binomial_coefficient(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc * (n - i) as u64 / (i as u64 + 1))
}

/// `C(m, n) p^n (1-p)^(m-n)`; zero when `n > m`.
pub fn binomial_pmf(m: usize, n: usize, p: f64) -> f64 {
    if n > m {
        return 0.0;
    }
    binomial_coefficient(m, n) as f64 * p.powi(n as i32) * (1.0 - p).powi((m - n) as i32)
}

fn check_count(name: &str, v: usize) -> Result<()> {
    if v == 0 {
        Err(Error::domain(format!("{name} must be at least 1")))
    } else {
        Ok(())
    }
}

/// CBG error probability when all `group_size` CBs share one error probability.
pub fn cbg_error_prob_iid(p_cb: f64, group_size: usize) -> Result<f64> {
    check_probability("p_cb", p_cb)?;
    check_count("group size", group_size)?;
    Ok(1.0 - (1.0 - p_cb).powi(group_size as i32))
}

/// TB error probability from `M` identical CBG error probabilities.
pub fn tbep_from_cbgep(p_cbg: f64, m: usize) -> Result<f64> {
    check_probability("p_cbg", p_cbg)?;
    check_count("M", m)?;
    Ok(1.0 - (1.0 - p_cbg).powi(m as i32))
}

/// Inverse of [`tbep_from_cbgep`].
pub fn cbgep_from_tbep(p_tb: f64, m: usize) -> Result<f64> {
    check_probability("p_tb", p_tb)?;
    check_count("M", m)?;
    // -expm1(ln(1-p)/M) keeps precision for small p.
    Ok(-((-p_tb).ln_1p() / m as f64).exp_m1())
}

/// `P(n_e <= N)` for `M` identical, independent CBGs (binomial tail).
pub fn at_most_n_failed_iid(p_cbg: f64, m: usize, n: usize) -> Result<f64> {
    check_probability("p_cbg", p_cbg)?;
    check_count("M", m)?;
    if n > m {
        return Err(Error::domain(format!("N = {n} exceeds M = {m}")));
    }
    let s: f64 = (0..=n).map(|k| binomial_pmf(m, k, p_cbg)).sum();
    Ok(s.min(1.0))
}

/// CBG error probability from non-identical CB error probabilities.
pub fn cbg_error_prob_general(cb_probs: &[f64]) -> Result<f64> {
    if cb_probs.is_empty() {
        return Err(Error::domain("a CBG holds at least one CB"));
    }
    let mut survive = 1.0;
    for &p in cb_probs {
        check_probability("p_cb", p)?;
        survive *= 1.0 - p;
    }
    Ok(1.0 - survive)
}

/// Poisson-binomial pmf by sequential convolution over CBGs.
pub(crate) fn poisson_binomial(probs: &[f64]) -> Vec<f64> {
    let mut pmf = vec![0.0; probs.len() + 1];
    pmf[0] = 1.0;
    for (i, &p) in probs.iter().enumerate() {
        let q = 1.0 - p;
        for k in (1..=i + 1).rev() {
            pmf[k] = pmf[k] * q + pmf[k - 1] * p;
        }
        pmf[0] *= q;
    }
    pmf
}

/// `P(exactly N of M independent, non-identical CBGs fail)`.
pub fn exact_n_failed(probs: &CbgErrorVector, n: usize) -> Result<f64> {
    if n > probs.len() {
        return Err(Error::domain(format!(
            "N = {n} exceeds M = {}",
            probs.len()
        )));
    }
    Ok(poisson_binomial(probs.as_slice())[n])
}

/// Odds ratio `p / (1 - p)`.
pub fn odds(p: f64) -> Result<f64> {
    check_probability("p", p)?;
    if p == 1.0 {
        return Err(Error::domain("odds of a certain failure are infinite"));
    }
    Ok(p / (1.0 - p))
}
