//! Forced rf evaporation as a truncated-Boltzmann scaling-law model.
//!
//! The rf knife sits at U = h(f − f₀) above the trap bottom. With a fixed
//! truncation parameter η the cloud follows T_rf = U/(η k_B), but never faster
//! than the rethermalization-limited rate γ_el η e^{−η} α, where
//! α = (η + κ − 3)/3 and T ∝ N^α. When the knife outruns the cloud the atoms
//! above it are spilled. Background-gas loss acts throughout.

use serde::{Deserialize, Serialize};

use super::{harmonic_psd, ThermalCloud, BEC_PSD};
use crate::error::{Error, Result};
use crate::physics::{AtomState, K_B, MU_B, PLANCK};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RampShape {
    #[default]
    Exponential,
    Linear,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RfRamp {
    /// Hz
    pub f_start: f64,
    /// Hz
    pub f_end: f64,
    /// s
    pub duration: f64,
    pub shape: RampShape,
}

impl Default for RfRamp {
    /// 75 MHz to 5.62 MHz in 8 s, exponential.
    fn default() -> Self {
        Self { f_start: 75e6, f_end: 5.62e6, duration: 8.0, shape: RampShape::Exponential }
    }
}

impl RfRamp {
    pub fn validate(&self) -> Result<()> {
        if !(self.f_start > self.f_end && self.f_end > 0.0 && self.duration >= 0.0 && self.duration.is_finite()) {
            return Err(Error::invalid("rf ramp needs f_start > f_end > 0 and a non-negative duration"));
        }
        Ok(())
    }

    /// Frequency at time `t` (clamped to the ramp).
    pub fn frequency(&self, t: f64) -> f64 {
        if self.duration <= 0.0 {
            return self.f_start;
        }
        let u = (t / self.duration).clamp(0.0, 1.0);
        match self.shape {
            RampShape::Exponential => self.f_start * (self.f_end / self.f_start).powf(u),
            RampShape::Linear => self.f_start + (self.f_end - self.f_start) * u,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvapOptions {
    /// rf resonance at the trap bottom (Hz).
    pub trap_bottom_hz: f64,
    /// One-body lifetime (s).
    pub lifetime: f64,
    /// Energy carried away per evaporated atom beyond η k_B T, in units of k_B T.
    pub kappa: f64,
    pub steps: usize,
    /// Number of recorded samples after t = 0.
    pub samples: usize,
}

impl Default for EvapOptions {
    fn default() -> Self {
        Self { trap_bottom_hz: trap_bottom_frequency(2e-4), lifetime: 61.0, kappa: 1.0, steps: 20_000, samples: 200 }
    }
}

/// rf frequency resonant at field `b` for the m_J = 1 state (Hz).
pub fn trap_bottom_frequency(b: f64) -> f64 {
    crate::physics::G_J_2S1 * MU_B * b / PLANCK
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvapSample {
    pub t: f64,
    pub rf_hz: f64,
    pub atom_count: f64,
    pub temperature: f64,
    pub psd: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvapTrajectory {
    pub samples: Vec<EvapSample>,
    /// First time the PSD reaches the condensation threshold.
    pub bec_crossing: Option<f64>,
}

impl EvapTrajectory {
    pub fn initial(&self) -> &EvapSample {
        &self.samples[0]
    }

    pub fn last(&self) -> &EvapSample {
        &self.samples[self.samples.len() - 1]
    }

    pub fn psd_gain(&self) -> f64 {
        self.last().psd / self.initial().psd
    }

    pub fn loss_fraction(&self) -> f64 {
        1.0 - self.last().atom_count / self.initial().atom_count
    }

    /// CSV with header `t_s,rf_hz,atom_count,temperature_k,psd`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t_s,rf_hz,atom_count,temperature_k,psd\n");
        for s in &self.samples {
            out.push_str(&format!("{:e},{:e},{:e},{:e},{:e}\n", s.t, s.rf_hz, s.atom_count, s.temperature, s.psd));
        }
        out
    }
}

/// Fraction of a 3D harmonic Boltzmann gas with energy above η k_B T.
fn tail_fraction(eta: f64) -> f64 {
    if eta <= 0.0 {
        return 1.0;
    }
    (-eta).exp() * (1.0 + eta + 0.5 * eta * eta)
}

/// Integrates the evaporation model over `ramp` with truncation `eta_cut`.
pub fn evaporate(
    c: &ThermalCloud,
    ramp: &RfRamp,
    eta_cut: f64,
    atom: &AtomState,
    opts: &EvapOptions,
) -> Result<EvapTrajectory> {
    ramp.validate()?;
    if !(3.0..=12.0).contains(&eta_cut) {
        return Err(Error::invalid(format!("eta_cut {eta_cut} outside [3, 12]")));
    }
    if !(ramp.f_end > opts.trap_bottom_hz) {
        return Err(Error::invalid("ramp ends at or below the trap bottom"));
    }
    if opts.steps == 0 || opts.samples == 0 || !(opts.lifetime > 0.0) {
        return Err(Error::invalid("evaporation needs steps, samples and a positive lifetime"));
    }
    let trap = c.trap;
    let sample = |t: f64, n: f64, temp: f64| EvapSample {
        t,
        rf_hz: ramp.frequency(t),
        atom_count: n,
        temperature: temp,
        psd: harmonic_psd(n, temp, &trap),
    };
    let (mut n, mut temp) = (c.atom_count, c.temperature);
    let mut samples = vec![sample(0.0, n, temp)];
    if ramp.duration == 0.0 {
        samples.extend((0..opts.samples).map(|_| sample(0.0, n, temp)));
        let bec_crossing = (samples[0].psd >= BEC_PSD).then_some(0.0);
        return Ok(EvapTrajectory { samples, bec_crossing });
    }

    let alpha = (eta_cut + opts.kappa - 3.0) / 3.0;
    let sigma = 8.0 * std::f64::consts::PI * atom.scattering_length.powi(2);
    let dt = ramp.duration / opts.steps as f64;
    let knife = |t: f64| PLANCK * (ramp.frequency(t) - opts.trap_bottom_hz);
    let mut u_prev = knife(0.0);
    let mut bec_crossing = (samples[0].psd >= BEC_PSD).then_some(0.0);
    let every = (opts.steps / opts.samples).max(1);

    for i in 1..=opts.steps {
        let t = i as f64 * dt;
        let u = knife(t);
        let cloud = ThermalCloud { atom_count: n, temperature: temp, trap };
        let v_mean = (8.0 * K_B * temp / (std::f64::consts::PI * atom.mass)).sqrt();
        let gamma_el = cloud.peak_density(atom) * sigma * v_mean / 2.0;
        let rate = gamma_el * eta_cut * (-eta_cut).exp() * alpha;
        let t_rf = u / (eta_cut * K_B);
        let t_new = temp.min(t_rf).max(temp * (-rate * dt).exp());
        let mut n_new = n * ((t_new / temp).ln() / alpha - dt / opts.lifetime).exp();
        if t_new > t_rf {
            // Knife below η_cut k_B T: atoms between the old and new knife are lost.
            let (e_old, e_new) = (u_prev / (K_B * t_new), u / (K_B * t_new));
            let q_old = tail_fraction(e_old);
            n_new *= ((1.0 - tail_fraction(e_new)) / (1.0 - q_old)).min(1.0);
        }
        u_prev = u;
        n = n_new;
        temp = t_new;
        let s = sample(t, n, temp);
        if bec_crossing.is_none() && s.psd >= BEC_PSD {
            // Interpolate in log PSD against the previous step.
            let (p_t, p_psd) = (t - dt, harmonic_psd(cloud.atom_count, cloud.temperature, &trap));
            let f = (BEC_PSD.ln() - p_psd.ln()) / (s.psd.ln() - p_psd.ln());
            bec_crossing = Some(p_t + dt * f.clamp(0.0, 1.0));
        }
        if i % every == 0 || i == opts.steps {
            samples.push(s);
        }
    }
    Ok(EvapTrajectory { samples, bec_crossing })
}
