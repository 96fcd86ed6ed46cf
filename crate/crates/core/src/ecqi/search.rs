//! Index searches over an MCS list for the largest `r` with `Q(r) >= P`.
//!
//! `Q` is expected to be non-increasing in `r`. Each search reports the
//! qualifying index (or `None` when nothing qualifies) and how many times it
//! evaluated `Q`.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchOutcome {
    pub index: Option<usize>,
    pub evaluations: usize,
}

impl SearchOutcome {
    /// Reported index, with 0 standing in when nothing qualifies.
    pub fn reported(&self) -> usize {
        self.index.unwrap_or(0)
    }
}

/// Visiting order of a search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanOrder {
    LinearAsc,
    LinearDesc,
    Binary,
}

/// Walk up from index 0 and stop at the first index that fails; report the
/// one before it.
pub fn search_linear_asc(
    len: usize,
    target: f64,
    mut q: impl FnMut(usize) -> f64,
) -> SearchOutcome {
    let mut evaluations = 0;
    for r in 0..len {
        evaluations += 1;
        if q(r) < target {
            return SearchOutcome {
                index: r.checked_sub(1),
                evaluations,
            };
        }
    }
    SearchOutcome {
        index: len.checked_sub(1),
        evaluations,
    }
}

/// Walk down from the top index and report the first one that qualifies.
pub fn search_linear_desc(
    len: usize,
    target: f64,
    mut q: impl FnMut(usize) -> f64,
) -> SearchOutcome {
    let mut evaluations = 0;
    for r in (0..len).rev() {
        evaluations += 1;
        if q(r) >= target {
            return SearchOutcome {
                index: Some(r),
                evaluations,
            };
        }
    }
    SearchOutcome {
        index: None,
        evaluations,
    }
}

/// Bisection: at most `ceil(log2(len + 1))` evaluations.
pub fn search_binary(len: usize, target: f64, q: impl FnMut(usize) -> f64) -> SearchOutcome {
    bisect(len, target, None, q)
}

/// Bisection with an early exit once a probe lands within `band` of `target`.
fn bisect(
    len: usize,
    target: f64,
    band: Option<f64>,
    mut q: impl FnMut(usize) -> f64,
) -> SearchOutcome {
    // Invariant: every index <= lo qualifies (lo = -1 means none known),
    // every index >= hi fails.
    let mut lo: isize = -1;
    let mut hi: isize = len as isize;
    let mut evaluations = 0;
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        evaluations += 1;
        let v = q(mid as usize);
        if band.is_some_and(|d| (v - target).abs() <= d) {
            return SearchOutcome {
                index: Some(mid as usize),
                evaluations,
            };
        }
        if v >= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    SearchOutcome {
        index: (lo >= 0).then_some(lo as usize),
        evaluations,
    }
}

/// Relaxed decision: accept the first visited index whose `Q` falls within
/// `[target - delta_p, target + delta_p]`; otherwise behave as the strict
/// search in `order`.
pub fn search_relaxed(
    len: usize,
    target: f64,
    delta_p: f64,
    order: ScanOrder,
    mut q: impl FnMut(usize) -> f64,
) -> SearchOutcome {
    let in_band = |v: f64| (v - target).abs() <= delta_p;
    match order {
        ScanOrder::Binary => bisect(len, target, Some(delta_p), q),
        ScanOrder::LinearAsc => {
            let mut evaluations = 0;
            for r in 0..len {
                evaluations += 1;
                let v = q(r);
                if in_band(v) {
                    return SearchOutcome {
                        index: Some(r),
                        evaluations,
                    };
                }
                if v < target {
                    return SearchOutcome {
                        index: r.checked_sub(1),
                        evaluations,
                    };
                }
            }
            SearchOutcome {
                index: len.checked_sub(1),
                evaluations,
            }
        }
        ScanOrder::LinearDesc => {
            let mut evaluations = 0;
            for r in (0..len).rev() {
                evaluations += 1;
                let v = q(r);
                if in_band(v) || v >= target {
                    return SearchOutcome {
                        index: Some(r),
                        evaluations,
                    };
                }
            }
            SearchOutcome {
                index: None,
                evaluations,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step(values: &[f64]) -> impl FnMut(usize) -> f64 + '_ {
        move |r| values[r]
    }

    #[test]
    fn two_entry_example() {
        let q = [0.95, 0.40];
        for out in [
            search_linear_asc(2, 0.5, step(&q)),
            search_linear_desc(2, 0.5, step(&q)),
            search_binary(2, 0.5, step(&q)),
        ] {
            assert_eq!(out.index, Some(0));
        }
    }

    #[test]
    fn nowhere_and_everywhere() {
        let none = [0.1; 28];
        let all = [0.99; 28];
        assert_eq!(search_binary(28, 0.5, step(&none)).index, None);
        assert_eq!(search_binary(28, 0.5, step(&none)).reported(), 0);
        assert_eq!(search_binary(28, 0.5, step(&all)).index, Some(27));
        assert_eq!(search_linear_asc(28, 0.5, step(&all)).index, Some(27));
        assert_eq!(search_linear_desc(28, 0.5, step(&none)).index, None);
        assert_eq!(search_linear_asc(28, 0.5, step(&none)).index, None);
    }

    #[test]
    fn binary_evaluation_bound() {
        for len in 1..=64usize {
            let bound = (len as f64).log2().ceil() as usize + 1;
            for cut in 0..=len {
                let q: Vec<f64> = (0..len).map(|r| if r < cut { 0.9 } else { 0.1 }).collect();
                let out = search_binary(len, 0.5, step(&q));
                assert_eq!(out.index, cut.checked_sub(1));
                assert!(out.evaluations <= bound, "len {len} cut {cut}");
            }
        }
    }

    #[test]
    fn relaxed_degenerate_and_large_tolerance() {
        let q: Vec<f64> = (0..16).map(|r| 1.0 - r as f64 / 16.0 - 0.01).collect();
        for order in [
            ScanOrder::LinearAsc,
            ScanOrder::LinearDesc,
            ScanOrder::Binary,
        ] {
            let strict = search_linear_desc(16, 0.5, step(&q));
            let relaxed = search_relaxed(16, 0.5, 0.0, order, step(&q));
            assert_eq!(relaxed.index, strict.index);
            let loose = search_relaxed(16, 0.5, 10.0, order, step(&q));
            assert_eq!(loose.evaluations, 1);
        }
    }
}
