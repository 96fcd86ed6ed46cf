//! Quasi-periodic XR video traffic.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::{Error, Result};

/// Gaussian with mean `mean` and deviation `std`, truncated to
/// `[lower, upper]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruncGaussianParams {
    pub mean: f64,
    pub std: f64,
    pub lower: f64,
    pub upper: f64,
}

impl TruncGaussianParams {
    pub fn new(mean: f64, std: f64, lower: f64, upper: f64) -> Result<Self> {
        let p = Self {
            mean,
            std,
            lower,
            upper,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.mean, self.std, self.lower, self.upper]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::domain(
                "truncated Gaussian parameters must be finite",
            ));
        }
        if self.std <= 0.0 {
            return Err(Error::domain(format!(
                "std = {} must be positive",
                self.std
            )));
        }
        if self.lower > self.upper {
            return Err(Error::domain(format!(
                "lower bound {} exceeds upper bound {}",
                self.lower, self.upper
            )));
        }
        Ok(())
    }

    /// Mean of the truncated law.
    pub fn truncated_mean(&self) -> f64 {
        let n = Normal::new(0.0, 1.0).expect("unit normal");
        let a = (self.lower - self.mean) / self.std;
        let b = (self.upper - self.mean) / self.std;
        let z = n.cdf(b) - n.cdf(a);
        if z <= 0.0 {
            return self.mean.clamp(self.lower, self.upper);
        }
        let pdf = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
        self.mean + self.std * (pdf(a) - pdf(b)) / z
    }

    /// The same law scaled by `k > 0`.
    pub fn scaled(&self, k: f64) -> Self {
        Self {
            mean: self.mean * k,
            std: self.std * k,
            lower: self.lower * k,
            upper: self.upper * k,
        }
    }
}

/// One draw by CDF inversion. Bounds in the upper tail are mirrored into the
/// lower tail, where the normal CDF keeps its relative precision.
pub fn sample_trunc_gaussian<R: Rng + ?Sized>(params: &TruncGaussianParams, rng: &mut R) -> f64 {
    let n = Normal::new(0.0, 1.0).expect("unit normal");
    let mut a = (params.lower - params.mean) / params.std;
    let mut b = (params.upper - params.mean) / params.std;
    let mirrored = a > 0.0;
    if mirrored {
        (a, b) = (-b, -a);
    }
    let (fa, fb) = (n.cdf(a), n.cdf(b));
    let z = if fb > fa {
        let u: f64 = rng.gen();
        n.inverse_cdf(fa + u * (fb - fa)).clamp(a, b)
    } else {
        // Interval too narrow (or too far out) to resolve: nearest point to the mean.
        0.0f64.clamp(a, b)
    };
    let z = if mirrored { -z } else { z };
    (params.mean + params.std * z).clamp(params.lower, params.upper)
}

/// One video frame and its delivery state.
#[derive(Debug, Clone, PartialEq)]
pub struct XrPacket {
    /// Frame number `f`, starting at 1.
    pub frame_index: u64,
    pub arrival_ms: f64,
    pub size_bits: u64,
    /// Bits not yet placed in a transport block.
    pub remaining_bits: u64,
    pub deadline_ms: f64,
}

/// Frame `f` arrives at `f * 1000 / fps + J_f` ms, for every `f` whose
/// nominal time is within `horizon_ms`. Sizes are in bits.
pub fn generate_traffic<R: Rng + ?Sized>(
    fps: f64,
    jitter: &TruncGaussianParams,
    size_bits: &TruncGaussianParams,
    pdb_ms: f64,
    horizon_ms: f64,
    rng: &mut R,
) -> Result<Vec<XrPacket>> {
    if !(fps > 0.0 && fps.is_finite()) {
        return Err(Error::domain(format!("frame rate {fps} must be positive")));
    }
    jitter.validate()?;
    size_bits.validate()?;
    let period = 1000.0 / fps;
    let frames = (horizon_ms / period + 1e-9).floor().max(0.0) as u64;
    let mut out = Vec::with_capacity(frames as usize);
    for f in 1..=frames {
        let j = sample_trunc_gaussian(jitter, rng);
        let size = sample_trunc_gaussian(size_bits, rng).round().max(1.0) as u64;
        let arrival_ms = f as f64 * period + j;
        out.push(XrPacket {
            frame_index: f,
            arrival_ms,
            size_bits: size,
            remaining_bits: size,
            deadline_ms: arrival_ms + pdb_ms,
        });
    }
    Ok(out)
}
