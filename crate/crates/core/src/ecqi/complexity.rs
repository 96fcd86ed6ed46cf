use crate::prob::binomial_coefficient;
use crate::{Error, Result};

/// Multiplications of direct subset summation: `M * C(M, N)`.
pub fn complexity_direct(m: usize, n: usize) -> Result<u64> {
    if n > m {
        return Err(Error::domain(format!("N = {n} exceeds M = {m}")));
    }
    Ok(m as u64 * binomial_coefficient(m, n))
}

/// Multiplications of the odds closed form: `M`, `2M + 1`, `3M + 3` for
/// `N = 1, 2, 3`.
pub fn complexity_closed(m: usize, n: usize) -> Result<u64> {
    let m = m as u64;
    match n {
        1 => Ok(m),
        2 => Ok(2 * m + 1),
        3 => Ok(3 * m + 3),
        _ => Err(Error::domain(format!(
            "closed-form count is defined for N in 1..=3, got {n}"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn direct_counts() {
        assert_eq!(complexity_direct(8, 2).unwrap(), 224);
        assert_eq!(complexity_direct(5, 0).unwrap(), 5);
        assert_eq!(complexity_direct(8, 1).unwrap(), 64);
        assert!(complexity_direct(3, 4).is_err());
    }

    #[test]
    fn closed_counts() {
        assert_eq!(complexity_closed(8, 1).unwrap(), 8);
        assert_eq!(complexity_closed(8, 2).unwrap(), 17);
        assert_eq!(complexity_closed(8, 3).unwrap(), 27);
        assert!(complexity_closed(8, 0).is_err());
        assert!(complexity_closed(8, 4).is_err());
    }
}
