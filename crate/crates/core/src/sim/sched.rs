//! Proportional-fair PRB assignment.

/// A UE competing for a PRB.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PfCandidate {
    pub ue: usize,
    /// Achievable rate on the PRB.
    pub rate: f64,
    /// Smoothed past throughput.
    pub avg_throughput: f64,
}

/// UE maximizing `rate / avg_throughput`; ties go to the lowest UE id.
pub fn pf_select(candidates: &[PfCandidate]) -> Option<usize> {
    let mut best: Option<(f64, usize)> = None;
    for c in candidates {
        let metric = c.rate / c.avg_throughput;
        best = match best {
            Some((m, ue)) if m > metric || (m == metric && ue < c.ue) => Some((m, ue)),
            _ => Some((metric, c.ue)),
        };
    }
    best.map(|(_, ue)| ue)
}
