//! Effective SINR compression (EESM and MMIB).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

/// Monotone piecewise-linear map from SINR (dB) to mutual information per bit.
///
/// Outside the tabulated range the curve is held flat at its end values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MiCurveDef", into = "MiCurveDef")]
pub struct MiCurve {
    modulation_order: u8,
    sinr_db: Vec<f64>,
    mi: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MiCurveDef {
    modulation_order: u8,
    /// `[sinr_db, mi]` pairs.
    points: Vec<[f64; 2]>,
}

impl TryFrom<MiCurveDef> for MiCurve {
    type Error = Error;
    fn try_from(d: MiCurveDef) -> Result<Self> {
        MiCurve::new(
            d.modulation_order,
            d.points.iter().map(|p| (p[0], p[1])).collect(),
        )
    }
}

impl From<MiCurve> for MiCurveDef {
    fn from(c: MiCurve) -> Self {
        MiCurveDef {
            modulation_order: c.modulation_order,
            points: c.sinr_db.iter().zip(&c.mi).map(|(&s, &m)| [s, m]).collect(),
        }
    }
}

impl MiCurve {
    pub fn new(modulation_order: u8, points: Vec<(f64, f64)>) -> Result<Self> {
        let field = "link.mi_curves";
        if points.len() < 2 {
            return Err(Error::validation(
                field,
                "an MI curve needs at least two points",
            ));
        }
        for w in points.windows(2) {
            if !(w[1].0 > w[0].0 && w[1].1 > w[0].1) {
                return Err(Error::validation(
                    field,
                    "MI curve points must be strictly increasing in SINR and MI",
                ));
            }
        }
        if points
            .iter()
            .any(|p| !(p.0.is_finite() && (0.0..=1.0).contains(&p.1)))
        {
            return Err(Error::validation(
                field,
                "MI values must lie in [0, 1] at finite SINR",
            ));
        }
        let (sinr_db, mi) = points.into_iter().unzip();
        Ok(Self {
            modulation_order,
            sinr_db,
            mi,
        })
    }

    pub fn modulation_order(&self) -> u8 {
        self.modulation_order
    }

    pub fn mi(&self, sinr_db: f64) -> f64 {
        interpolate(&self.sinr_db, &self.mi, sinr_db)
    }

    pub fn sinr_db(&self, mi: f64) -> f64 {
        interpolate(&self.mi, &self.sinr_db, mi)
    }
}

fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let last = xs.len() - 1;
    if x.is_nan() || x <= xs[0] {
        return ys[0];
    }
    if x >= xs[last] {
        return ys[last];
    }
    let i = xs.partition_point(|&v| v <= x) - 1;
    let t = (x - xs[i]) / (xs[i + 1] - xs[i]);
    ys[i] + t * (ys[i + 1] - ys[i])
}

/// How per-RE SINRs are compressed into one effective value.
#[derive(Debug, Clone, Copy)]
pub enum EsmMethod<'a> {
    Eesm { beta: f64 },
    Mmib(&'a MiCurve),
}

/// Effective linear SINR of a set of linear per-RE SINRs.
pub fn effective_sinr(per_re_sinr: &[f64], method: EsmMethod<'_>) -> Result<f64> {
    if per_re_sinr.is_empty() {
        return Err(Error::domain("effective SINR of an empty RE set"));
    }
    if per_re_sinr.iter().any(|s| s.is_nan() || *s < 0.0) {
        return Err(Error::domain("per-RE SINR must be non-negative"));
    }
    let (lo, hi) = per_re_sinr
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &s| {
            (lo.min(s), hi.max(s))
        });
    if lo == hi {
        return Ok(lo);
    }
    let n = per_re_sinr.len() as f64;
    let value = match method {
        EsmMethod::Eesm { beta } => {
            if !(beta.is_finite() && beta > 0.0) {
                return Err(Error::domain(format!("EESM beta {beta} must be positive")));
            }
            // Factor out the smallest term: -b ln(mean(exp(-g/b))) without underflow.
            let mean: f64 = per_re_sinr
                .iter()
                .map(|&g| (-(g - lo) / beta).exp())
                .sum::<f64>()
                / n;
            lo - beta * mean.ln()
        }
        EsmMethod::Mmib(curve) => {
            let mean_mi = per_re_sinr
                .iter()
                .map(|&g| curve.mi(linear_to_db(g)))
                .sum::<f64>()
                / n;
            db_to_linear(curve.sinr_db(mean_mi))
        }
    };
    Ok(value.clamp(lo, hi))
}
