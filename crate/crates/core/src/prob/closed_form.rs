//! Odds-domain closed forms and instrumented evaluation routes.
//!
//! With `O_m = p_m / (1 - p_m)` and `Pi = prod 1 / (1 + O_m)`,
//! `P(n_e = N) = Pi * e_N(O_1, ..., O_M)` where `e_N` is the elementary
//! symmetric polynomial. For `N <= 3`, `e_N` follows from the power sums
//! `s_k = sum O_m^k`:
//!
//! ```text
//! e_1 = s1
//! e_2 = (s1^2 - s2) / 2
//! e_3 = (s1^3 - 3 s1 s2 + 2 s3) / 6
//! ```
//!
//! Multiplication counts follow the usual accounting for this scheme: the
//! running product `Pi` costs `M`, each power sum above the first costs `M`,
//! and the powers/cross products of sums cost one each. Scaling by integer
//! constants and the final multiplication by `Pi` are not counted. That gives
//! `M`, `2M + 1` and `3M + 3` for `N = 1, 2, 3`.

use super::dd::Dd;
use super::{binomial_coefficient, CbgErrorVector, OddsVector};
use crate::error::{Error, Result};

/// Largest `N` with a closed form.
pub const MAX_CLOSED_FORM_N: usize = 3;

/// A value together with the multiplications spent computing it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Counted<T> {
    pub value: T,
    pub multiplications: u64,
}

struct OddsSums {
    pi: f64,
    /// `e_0..=e_N`
    e: [Dd; MAX_CLOSED_FORM_N + 1],
    multiplications: u64,
}

fn odds_sums(odds: &OddsVector, n: usize) -> Result<OddsSums> {
    let o = odds.as_slice();
    let m = o.len();
    if n > MAX_CLOSED_FORM_N {
        return Err(Error::Unsupported(format!(
            "closed form only covers N <= {MAX_CLOSED_FORM_N}, got {n}"
        )));
    }
    if n > m {
        return Err(Error::domain(format!("N = {n} exceeds M = {m}")));
    }
    let mut mults = 0u64;

    let mut pi = 1.0;
    for &om in o {
        pi *= 1.0 / (1.0 + om);
        mults += 1;
    }

    let mut e = [Dd::ZERO; MAX_CLOSED_FORM_N + 1];
    e[0] = Dd::from_f64(1.0);
    if n == 0 {
        return Ok(OddsSums {
            pi,
            e,
            multiplications: mults,
        });
    }

    let s1 = o
        .iter()
        .fold(Dd::ZERO, |acc, &om| acc.add(Dd::from_f64(om)));
    e[1] = s1;

    if n >= 2 {
        let mut s2 = Dd::ZERO;
        let mut s3 = Dd::ZERO;
        for &om in o {
            let sq = Dd::square(om);
            mults += 1;
            s2 = s2.add(sq);
            if n >= 3 {
                s3 = s3.add(sq.mul_f64(om));
                mults += 1;
            }
        }
        let s1_sq = s1.mul(s1);
        mults += 1;
        e[2] = s1_sq.sub(s2).mul_f64(0.5);
        if n >= 3 {
            let s1_cu = s1_sq.mul(s1);
            let s1_s2 = s1.mul(s2);
            mults += 2;
            let num = s1_cu.sub(s1_s2.mul_f64(3.0)).add(s3.mul_f64(2.0));
            e[3] = Dd::from_f64(num.to_f64() / 6.0);
        }
    }

    Ok(OddsSums {
        pi,
        e,
        multiplications: mults,
    })
}

/// `P(n_e = N)` for `N <= 3` through the odds closed form.
pub fn closed_form_n_failed(odds: &OddsVector, n: usize) -> Result<f64> {
    Ok(closed_form_n_failed_counted(odds, n)?.value)
}

/// [`closed_form_n_failed`] with its multiplication count.
pub fn closed_form_n_failed_counted(odds: &OddsVector, n: usize) -> Result<Counted<f64>> {
    let sums = odds_sums(odds, n)?;
    Ok(Counted {
        value: (sums.pi * sums.e[n].to_f64()).clamp(0.0, 1.0),
        multiplications: sums.multiplications,
    })
}

/// `P(n_e <= N)` for `N <= 3`; the power sums are shared across terms so the
/// count equals that of the single term at `N`.
pub fn closed_form_at_most(odds: &OddsVector, n: usize) -> Result<Counted<f64>> {
    let sums = odds_sums(odds, n)?;
    let total = sums.e[..=n].iter().fold(Dd::ZERO, |acc, &e| acc.add(e));
    Ok(Counted {
        value: (sums.pi * total.to_f64()).clamp(0.0, 1.0),
        multiplications: sums.multiplications,
    })
}

/// Rough absolute error bound of the closed form at `N`.
///
/// The cancellation in the power-sum identities scales with `Pi * s1^N`; the
/// sums carry about 104 bits, so the bound is that magnitude times `2^-100`.
pub fn closed_form_error_bound(odds: &OddsVector, n: usize) -> f64 {
    let o = odds.as_slice();
    let pi: f64 = o.iter().map(|om| 1.0 / (1.0 + om)).product();
    let s1: f64 = o.iter().sum();
    let dd_eps = 2f64.powi(-100);
    (pi * s1.max(1.0).powi(n as i32) * dd_eps).max(f64::EPSILON)
}

/// `P(n_e = N)` by direct summation over every `N`-subset of failing CBGs.
///
/// Each of the `C(M, N)` terms is a product of `M` factors accumulated from
/// one, so the count is `M * C(M, N)`.
pub fn direct_n_failed_counted(probs: &CbgErrorVector, n: usize) -> Result<Counted<f64>> {
    let p = probs.as_slice();
    let m = p.len();
    if n > m {
        return Err(Error::domain(format!("N = {n} exceeds M = {m}")));
    }
    let mut total = 0.0;
    let mut mults = 0u64;
    let mut chosen = vec![false; m];
    for_each_subset(m, n, 0, &mut chosen, &mut |failing| {
        let mut term = 1.0;
        for (pm, &fails) in p.iter().zip(failing) {
            term *= if fails { *pm } else { 1.0 - pm };
            mults += 1;
        }
        total += term;
    });
    debug_assert_eq!(mults, m as u64 * binomial_coefficient(m, n));
    Ok(Counted {
        value: total,
        multiplications: mults,
    })
}

fn for_each_subset(
    m: usize,
    remaining: usize,
    start: usize,
    chosen: &mut [bool],
    f: &mut impl FnMut(&[bool]),
) {
    if remaining == 0 {
        f(chosen);
        return;
    }
    for i in start..=m - remaining {
        chosen[i] = true;
        for_each_subset(m, remaining - 1, i + 1, chosen, f);
        chosen[i] = false;
    }
}

/// `pmf[0..=N]` of the Poisson-binomial law, truncated at `N`.
///
/// Entry `k` only depends on entries `<= k`, so the truncation is exact.
/// Each update costs two multiplications (one for `k = 0`).
pub fn poisson_binomial_prefix_counted(probs: &[f64], n: usize) -> Counted<Vec<f64>> {
    let mut pmf = vec![0.0; n + 1];
    pmf[0] = 1.0;
    let mut mults = 0u64;
    for (i, &p) in probs.iter().enumerate() {
        let q = 1.0 - p;
        for k in (1..=n.min(i + 1)).rev() {
            pmf[k] = pmf[k] * q + pmf[k - 1] * p;
            mults += 2;
        }
        pmf[0] *= q;
        mults += 1;
    }
    Counted {
        value: pmf,
        multiplications: mults,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::oracle::brute_force_n_failed;

    fn odds_of(p: &[f64]) -> OddsVector {
        CbgErrorVector::new(p.to_vec()).unwrap().odds().unwrap()
    }

    #[test]
    fn documented_examples() {
        let o = odds_of(&[0.1, 0.2]);
        let one = closed_form_n_failed(&o, 1).unwrap();
        assert!((one - 0.26).abs() < 1e-15, "{one}");
        let o = odds_of(&[0.1, 0.2, 0.3]);
        let two = closed_form_n_failed(&o, 2).unwrap();
        assert!((two - 0.092).abs() < 1e-15, "{two}");
        let zero = closed_form_n_failed(&o, 0).unwrap();
        assert!((zero - 0.504).abs() < 1e-15);
        let three = closed_form_n_failed(&o, 3).unwrap();
        assert!((three - 0.006).abs() < 1e-15);
    }

    #[test]
    fn unsupported_and_domain_errors() {
        let o = odds_of(&[0.1, 0.2, 0.3, 0.4, 0.5]);
        assert!(matches!(
            closed_form_n_failed(&o, 4),
            Err(Error::Unsupported(_))
        ));
        let o = odds_of(&[0.1, 0.2]);
        assert!(matches!(closed_form_n_failed(&o, 3), Err(Error::Domain(_))));
    }

    #[test]
    fn counts_follow_closed_accounting() {
        for m in 3..=8usize {
            let p: Vec<f64> = (0..m).map(|i| 0.05 * (i + 1) as f64).collect();
            let o = odds_of(&p);
            let mm = m as u64;
            assert_eq!(
                closed_form_n_failed_counted(&o, 0).unwrap().multiplications,
                mm
            );
            assert_eq!(
                closed_form_n_failed_counted(&o, 1).unwrap().multiplications,
                mm
            );
            assert_eq!(
                closed_form_n_failed_counted(&o, 2).unwrap().multiplications,
                2 * mm + 1
            );
            assert_eq!(
                closed_form_n_failed_counted(&o, 3).unwrap().multiplications,
                3 * mm + 3
            );
        }
    }

    #[test]
    fn direct_route_count_and_value() {
        let v = CbgErrorVector::new(vec![0.1, 0.25, 0.4, 0.05, 0.6, 0.33, 0.2, 0.8]).unwrap();
        let c = direct_n_failed_counted(&v, 2).unwrap();
        assert_eq!(c.multiplications, 224);
        assert!((c.value - brute_force_n_failed(&v, 2).unwrap()).abs() < 1e-13);
        assert_eq!(direct_n_failed_counted(&v, 0).unwrap().multiplications, 8);
    }

    #[test]
    fn dominant_odds_stay_accurate() {
        // One CBG almost certainly fails; plain f64 power sums lose ~1e-10 here.
        let v = CbgErrorVector::new(vec![0.9995, 0.01, 0.03, 0.2, 0.002, 0.07, 0.11, 0.4]).unwrap();
        let o = v.odds().unwrap();
        for n in 0..=3 {
            let cf = closed_form_n_failed(&o, n).unwrap();
            let bf = brute_force_n_failed(&v, n).unwrap();
            assert!((cf - bf).abs() < 1e-13, "N={n}: {cf} vs {bf}");
        }
    }

    #[test]
    fn truncated_dp_matches_full() {
        let p = [0.1, 0.7, 0.3, 0.05];
        let full = crate::prob::poisson_binomial(&p);
        let pref = poisson_binomial_prefix_counted(&p, 2);
        for k in 0..=2 {
            assert!((full[k] - pref.value[k]).abs() < 1e-15);
        }
        // 4 CBGs, N = 2: k=0 costs 1 each, k>=1 costs 2 for min(i+1, 2) entries.
        assert_eq!(pref.multiplications, 4 + 2 * (1 + 2 + 2 + 2));
    }

    #[test]
    fn at_most_sums_terms() {
        let o = odds_of(&[0.1, 0.2, 0.3]);
        let c = closed_form_at_most(&o, 2).unwrap();
        assert!((c.value - (0.504 + 0.398 + 0.092)).abs() < 1e-14);
        assert_eq!(c.multiplications, 7);
    }
}
