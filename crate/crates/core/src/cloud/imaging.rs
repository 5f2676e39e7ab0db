//! Photon-by-photon Doppler detuning of a resonantly illuminated atom.
//!
//! The atom starts at rest on resonance. Each scattered photon adds one recoil
//! velocity along the beam (spontaneous emission averages out), so the detuning
//! grows as −k v. Photons are spaced by the mean interval 1/R(v).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::physics::Transition;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoilCurve {
    /// Time of each point (s); point n follows the n-th photon.
    pub t: Vec<f64>,
    /// Scattering rate in units of Γ/2, i.e. s/(1 + s + 4δ²/Γ²).
    pub rate: Vec<f64>,
}

impl RecoilCurve {
    /// Time at which the rate first falls to half its initial value,
    /// interpolated linearly between photons. `None` if it never does.
    pub fn half_time(&self) -> Option<f64> {
        let half = self.rate[0] / 2.0;
        let i = self.rate.iter().position(|r| *r <= half)?;
        let (t0, t1, r0, r1) = (self.t[i - 1], self.t[i], self.rate[i - 1], self.rate[i]);
        Some(t0 + (t1 - t0) * (r0 - half) / (r0 - r1))
    }

    /// CSV with header `t_s,normalized_rate`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t_s,normalized_rate\n");
        for (t, r) in self.t.iter().zip(&self.rate) {
            out.push_str(&format!("{t:e},{r:e}\n"));
        }
        out
    }
}

/// Rate series up to `duration` for saturation parameter `s`.
pub fn recoil_detuning_curve(line: &Transition, s: f64, duration: f64) -> Result<RecoilCurve> {
    if !(s > 0.0 && s.is_finite()) || !(duration >= 0.0 && duration.is_finite()) {
        return Err(Error::invalid("recoil curve needs s > 0 and a non-negative duration"));
    }
    let k = line.wavenumber();
    let g = line.linewidth;
    let norm = |v: f64| s / (1.0 + s + 4.0 * (k * v / g).powi(2));
    let (mut t, mut v) = (0.0, 0.0);
    let mut curve = RecoilCurve { t: vec![0.0], rate: vec![norm(0.0)] };
    loop {
        let r = norm(v);
        t += 2.0 / (g * r);
        if t > duration {
            break;
        }
        v += line.recoil_velocity;
        curve.t.push(t);
        curve.rate.push(norm(v));
    }
    Ok(curve)
}

/// Photons needed to Doppler-shift the atom by one linewidth: first n with n k v_rec ≥ Γ.
pub fn photons_to_detune(line: &Transition) -> usize {
    (line.linewidth / (line.wavenumber() * line.recoil_velocity)).ceil() as usize
}

/// Closed-form estimate Γ/(k v_rec).
pub fn photons_to_detune_estimate(line: &Transition) -> f64 {
    line.linewidth / (line.wavenumber() * line.recoil_velocity)
}
