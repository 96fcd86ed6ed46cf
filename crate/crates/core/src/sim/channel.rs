//! Indoor multi-cell channel: distance pathloss, log-normal shadowing and
//! per-PRB Rayleigh fading from a tapped delay line whose taps evolve as
//! first-order autoregressive processes.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TopologyParams {
    /// Cells on a straight line, `isd_m` apart.
    pub cells: usize,
    pub isd_m: f64,
    /// Depth of the hall perpendicular to the line of cells.
    pub area_depth_m: f64,
    pub ues_per_cell: usize,
}

impl Default for TopologyParams {
    fn default() -> Self {
        Self {
            cells: 3,
            isd_m: 20.0,
            area_depth_m: 20.0,
            ues_per_cell: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelParams {
    pub carrier_ghz: f64,
    pub tx_power_dbm: f64,
    pub noise_figure_db: f64,
    /// `PL = intercept + 10 * exponent * log10(d_3d) + 20 * log10(f_GHz)`.
    pub pathloss_intercept_db: f64,
    pub pathloss_exponent: f64,
    pub shadowing_std_db: f64,
    /// Beamforming gain towards the serving UE.
    pub serving_gain_db: f64,
    /// Gain of other cells' beams as seen by a UE they do not serve.
    pub interferer_gain_db: f64,
    pub bs_height_m: f64,
    pub ue_height_m: f64,
    pub ue_speed_kmh: f64,
    /// Per-slot tap correlation; derived from the Doppler shift if absent.
    pub ar_coefficient: Option<f64>,
    pub taps: usize,
    pub delay_spread_ns: f64,
    /// Receiver impairment floor: SINR saturates at this value.
    pub max_sinr_db: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            carrier_ghz: 4.0,
            tx_power_dbm: 24.0,
            noise_figure_db: 9.0,
            pathloss_intercept_db: 32.4,
            pathloss_exponent: 1.73,
            shadowing_std_db: 3.0,
            serving_gain_db: 21.0,
            interferer_gain_db: -6.0,
            bs_height_m: 3.0,
            ue_height_m: 1.5,
            ue_speed_kmh: 3.0,
            ar_coefficient: None,
            taps: 4,
            delay_spread_ns: 40.0,
            max_sinr_db: 30.0,
        }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        let field = |name: &str, ok: bool, msg: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::validation(format!("channel.{name}"), msg))
            }
        };
        field("carrier_ghz", self.carrier_ghz > 0.0, "must be positive")?;
        field(
            "tx_power_dbm",
            self.tx_power_dbm.is_finite(),
            "must be finite",
        )?;
        field(
            "noise_figure_db",
            self.noise_figure_db.is_finite(),
            "must be finite",
        )?;
        field(
            "pathloss_exponent",
            self.pathloss_exponent > 0.0,
            "must be positive",
        )?;
        field(
            "shadowing_std_db",
            self.shadowing_std_db >= 0.0,
            "must be >= 0",
        )?;
        field("ue_speed_kmh", self.ue_speed_kmh >= 0.0, "must be >= 0")?;
        field("taps", (1..=32).contains(&self.taps), "must be in 1..=32")?;
        field(
            "delay_spread_ns",
            self.delay_spread_ns >= 0.0,
            "must be >= 0",
        )?;
        field(
            "max_sinr_db",
            self.max_sinr_db.is_finite(),
            "must be finite",
        )?;
        if let Some(a) = self.ar_coefficient {
            field(
                "ar_coefficient",
                (0.0..=1.0).contains(&a),
                "must be in [0, 1]",
            )?;
        }
        Ok(())
    }

    /// Per-slot correlation of the fading taps.
    pub fn ar_coefficient(&self, slot_ms: f64) -> f64 {
        self.ar_coefficient.unwrap_or_else(|| {
            let speed = self.ue_speed_kmh / 3.6;
            let doppler = speed * self.carrier_ghz * 1e9 / SPEED_OF_LIGHT;
            bessel_j0(2.0 * std::f64::consts::PI * doppler * slot_ms * 1e-3).clamp(0.0, 1.0)
        })
    }

    /// Pathloss in dB at 3D distance `d_m`.
    pub fn pathloss_db(&self, d_m: f64) -> f64 {
        self.pathloss_intercept_db
            + 10.0 * self.pathloss_exponent * d_m.max(1.0).log10()
            + 20.0 * self.carrier_ghz.log10()
    }
}

/// Bessel function of the first kind, order zero, by its power series.
pub fn bessel_j0(x: f64) -> f64 {
    let q = -(x * x) / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        term *= q / (k * k) as f64;
        sum += term;
        if term.abs() < 1e-17 * sum.abs().max(1e-300) {
            break;
        }
    }
    sum
}

/// `S / (sum(I) + N)` in linear units.
pub fn sinr_from_powers(serving: f64, interferers: &[f64], noise: f64) -> f64 {
    serving / (interferers.iter().sum::<f64>() + noise)
}

#[derive(Debug, Clone, PartialEq)]
pub struct UePlacement {
    pub position: (f64, f64),
    pub serving_cell: usize,
}

/// Cell sites, UE drops, large-scale gains and fading state.
#[derive(Debug, Clone)]
pub struct Channel {
    cells: usize,
    prbs: usize,
    placements: Vec<UePlacement>,
    /// `[ue][cell]` linear gain including shadowing and serving beam gain.
    large_scale: Vec<Vec<f64>>,
    /// `[ue][cell][tap]` fading taps.
    taps: Vec<Complex64>,
    /// `[prb][tap]` tap weight times delay phase.
    steering: Vec<Complex64>,
    num_taps: usize,
    ar: f64,
    tx_mw_per_prb: f64,
    noise_mw_per_prb: f64,
    /// Self-interference fraction from the SINR ceiling.
    impairment: f64,
}

fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

impl Channel {
    /// Drops `ues_per_cell` UEs uniformly into the hall for every cell,
    /// keeping each drop only if that cell has the strongest RSRP.
    pub fn drop_ues<R: Rng + ?Sized>(
        topo: &TopologyParams,
        params: &ChannelParams,
        prbs: usize,
        scs_khz: f64,
        slot_ms: f64,
        rng: &mut R,
    ) -> Result<Self> {
        params.validate()?;
        if topo.cells == 0 {
            return Err(Error::validation("topology.cells", "must be at least 1"));
        }
        if !(topo.isd_m > 0.0 && topo.area_depth_m > 0.0) {
            return Err(Error::validation(
                "topology.isd_m",
                "distances must be positive",
            ));
        }
        let sites: Vec<(f64, f64)> = (0..topo.cells)
            .map(|c| (c as f64 * topo.isd_m, 0.0))
            .collect();
        let dh = params.bs_height_m - params.ue_height_m;
        let x_range = (-topo.isd_m / 2.0, (topo.cells as f64 - 0.5) * topo.isd_m);
        let y_range = (-topo.area_depth_m / 2.0, topo.area_depth_m / 2.0);

        let mut placements = Vec::new();
        let mut large_scale = Vec::new();
        for cell in 0..topo.cells {
            for _ in 0..topo.ues_per_cell {
                let mut placed = false;
                for _ in 0..100_000 {
                    let pos = (
                        rng.gen_range(x_range.0..x_range.1),
                        rng.gen_range(y_range.0..y_range.1),
                    );
                    let gains_db: Vec<f64> = sites
                        .iter()
                        .map(|s| {
                            let d =
                                ((pos.0 - s.0).powi(2) + (pos.1 - s.1).powi(2) + dh * dh).sqrt();
                            let shadow: f64 =
                                rng.sample::<f64, _>(StandardNormal) * params.shadowing_std_db;
                            -params.pathloss_db(d) - shadow
                        })
                        .collect();
                    let best = argmax(&gains_db);
                    if best == cell {
                        let g: Vec<f64> = gains_db
                            .iter()
                            .enumerate()
                            .map(|(c, db)| {
                                let beam = if c == cell {
                                    params.serving_gain_db
                                } else {
                                    params.interferer_gain_db
                                };
                                10f64.powf((db + beam) / 10.0)
                            })
                            .collect();
                        placements.push(UePlacement {
                            position: pos,
                            serving_cell: cell,
                        });
                        large_scale.push(g);
                        placed = true;
                        break;
                    }
                }
                if !placed {
                    return Err(Error::domain(format!(
                        "could not place a UE in cell {cell}"
                    )));
                }
            }
        }
        Ok(Self::from_gains(
            placements,
            large_scale,
            params,
            prbs,
            scs_khz,
            slot_ms,
            rng,
        ))
    }

    /// Channel with the given large-scale gains and fresh fading.
    pub fn from_gains<R: Rng + ?Sized>(
        placements: Vec<UePlacement>,
        large_scale: Vec<Vec<f64>>,
        params: &ChannelParams,
        prbs: usize,
        scs_khz: f64,
        slot_ms: f64,
        rng: &mut R,
    ) -> Self {
        let cells = large_scale.first().map_or(0, Vec::len);
        let num_taps = params.taps;
        let prb_hz = 12.0 * scs_khz * 1e3;
        let ds = params.delay_spread_ns * 1e-9;
        let weights: Vec<f64> = (0..num_taps).map(|l| (-(l as f64)).exp()).collect();
        let total: f64 = weights.iter().sum();
        let mut steering = Vec::with_capacity(prbs * num_taps);
        for k in 0..prbs {
            for (l, w) in weights.iter().enumerate() {
                let phase = -2.0 * std::f64::consts::PI * k as f64 * prb_hz * l as f64 * ds;
                steering.push(Complex64::from_polar((w / total).sqrt(), phase));
            }
        }
        let taps = (0..placements.len() * cells * num_taps)
            .map(|_| complex_normal(rng))
            .collect();
        let noise_dbm = -174.0 + 10.0 * prb_hz.log10() + params.noise_figure_db;
        Self {
            cells,
            prbs,
            placements,
            large_scale,
            taps,
            steering,
            num_taps,
            ar: params.ar_coefficient(slot_ms),
            tx_mw_per_prb: dbm_to_mw(params.tx_power_dbm) / prbs.max(1) as f64,
            noise_mw_per_prb: dbm_to_mw(noise_dbm),
            impairment: 10f64.powf(-params.max_sinr_db / 10.0),
        }
    }

    pub fn num_ues(&self) -> usize {
        self.placements.len()
    }

    pub fn num_cells(&self) -> usize {
        self.cells
    }

    pub fn prbs(&self) -> usize {
        self.prbs
    }

    pub fn placements(&self) -> &[UePlacement] {
        &self.placements
    }

    pub fn ar_coefficient(&self) -> f64 {
        self.ar
    }

    /// Advances every fading tap by one slot.
    pub fn evolve<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let a = self.ar;
        let b = (1.0 - a * a).max(0.0).sqrt();
        for h in &mut self.taps {
            *h = *h * a + complex_normal(rng) * b;
        }
    }

    /// Complex fading coefficient between `ue` and `cell` on `prb`.
    pub fn fading(&self, ue: usize, cell: usize, prb: usize) -> Complex64 {
        let base = (ue * self.cells + cell) * self.num_taps;
        let taps = &self.taps[base..base + self.num_taps];
        let steer = &self.steering[prb * self.num_taps..(prb + 1) * self.num_taps];
        taps.iter().zip(steer).map(|(h, s)| h * s).sum()
    }

    /// Received power in mW on one PRB.
    pub fn rx_power(&self, ue: usize, cell: usize, prb: usize) -> f64 {
        self.tx_mw_per_prb * self.large_scale[ue][cell] * self.fading(ue, cell, prb).norm_sqr()
    }

    /// Linear SINR of `ue` on `prb`, with interference from every other cell
    /// for which `active(cell, prb)` holds.
    pub fn sinr(&self, ue: usize, prb: usize, active: impl Fn(usize, usize) -> bool) -> f64 {
        let serving = self.placements[ue].serving_cell;
        let interference: f64 = (0..self.cells)
            .filter(|&c| c != serving && active(c, prb))
            .map(|c| self.rx_power(ue, c, prb))
            .sum();
        let s = self.rx_power(ue, serving, prb);
        sinr_from_powers(
            s,
            &[interference, s * self.impairment],
            self.noise_mw_per_prb,
        )
    }

    /// [`Channel::sinr`] on every PRB, with activity given per cell and PRB.
    pub fn sinr_all(&self, ue: usize, usage: &[Vec<bool>]) -> Vec<f64> {
        (0..self.prbs)
            .map(|k| self.sinr(ue, k, |c, p| usage[c][p]))
            .collect()
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}
