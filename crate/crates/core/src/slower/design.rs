//! Target field and slowing efficiency.
//!
//! Axis convention: x increases along the atomic motion, the slowing beam
//! travels towards −x, and an atom at speed v is resonant where
//! `μ_eff B(x)/ħ = δ₀ + k v`. With this orientation the local efficiency is
//!
//! ```text
//! η(x) = −(2 m μ_eff)/(ħ² k³ Γ) · dB/dx · (μ_eff B(x)/ħ − δ₀)
//! ```
//!
//! which is positive on a decelerating taper (dB/dx < 0 along the motion).

use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::FieldProfile;
use crate::physics::{AtomState, LaserConfig, HBAR};

/// Nodes used on the decelerating span; spaced uniformly in velocity so the
/// steep downstream end is sampled densely.
const SPAN_NODES: usize = 2000;
const TAIL_NODES: usize = 60;

/// `ħ k Γ / (2m)`, the saturated radiation-pressure deceleration.
pub fn max_deceleration(laser: &LaserConfig, atom: &AtomState) -> f64 {
    let t = &laser.transition;
    HBAR * t.wavenumber() * t.linewidth / (2.0 * atom.mass)
}

/// Length over which a constant fraction `eta` of the maximum deceleration
/// takes atoms from `v0` to `vf`.
pub fn decelerating_span(v0: f64, vf: f64, eta: f64, laser: &LaserConfig, atom: &AtomState) -> f64 {
    (v0 * v0 - vf * vf) / (2.0 * eta * max_deceleration(laser, atom))
}

/// Field that makes an atom of velocity `v` resonant.
pub fn resonant_field(v: f64, laser: &LaserConfig, atom: &AtomState) -> f64 {
    HBAR * (laser.detuning + laser.transition.wavenumber() * v) / atom.mu_eff
}

/// Velocity resonant with field `b`.
pub fn resonant_velocity(b: f64, laser: &LaserConfig, atom: &AtomState) -> f64 {
    (atom.mu_eff * b / HBAR - laser.detuning) / laser.transition.wavenumber()
}

/// Ideal slower field on `[0, length]`.
///
/// The decelerating span `[0, L_d]` follows `v(x) = sqrt(v0² − 2 η a_max x)`;
/// the remainder up to `length` holds the field resonant with `vf`.
pub fn target_field(
    v0: f64,
    vf: f64,
    length: f64,
    eta_design: f64,
    laser: &LaserConfig,
    atom: &AtomState,
) -> Result<FieldProfile> {
    if !(eta_design > 0.0 && eta_design <= 1.0) {
        return Err(Error::invalid("design efficiency must lie in (0, 1]"));
    }
    if !(vf >= 0.0) || !(v0 >= vf) || !(length > 0.0) {
        return Err(Error::invalid("need 0 <= vf <= v0 and a positive length"));
    }
    let a = eta_design * max_deceleration(laser, atom);
    let span = decelerating_span(v0, vf, eta_design, laser, atom);
    if span > length {
        return Err(Error::InfeasibleDesign {
            reason: format!("{v0} -> {vf} m/s at eta {eta_design} does not fit in {length} m"),
            min_length_m: span,
        });
    }
    let k = laser.transition.wavenumber();
    let slope_of = |v: f64| -HBAR * k * a / (atom.mu_eff * v);

    let mut x = Vec::with_capacity(SPAN_NODES + TAIL_NODES);
    let mut b = Vec::with_capacity(x.capacity());
    let mut db = Vec::with_capacity(x.capacity());
    if span > 0.0 {
        for i in 0..SPAN_NODES {
            let v = v0 + (vf - v0) * i as f64 / (SPAN_NODES - 1) as f64;
            let xi = if i == SPAN_NODES - 1 { span } else { (v0 * v0 - v * v) / (2.0 * a) };
            if let Some(&last) = x.last() {
                if xi <= last {
                    continue;
                }
            }
            x.push(xi);
            b.push(resonant_field(v, laser, atom));
            db.push(slope_of(v));
        }
    } else {
        x.push(0.0);
        b.push(resonant_field(vf, laser, atom));
        db.push(0.0);
    }
    let b_end = resonant_field(vf, laser, atom);
    let tail = length - span;
    if tail > 0.0 {
        let first = (tail / TAIL_NODES as f64).min(1e-4);
        x.push(span + first);
        b.push(b_end);
        db.push(0.0);
        for i in 1..=TAIL_NODES {
            let xi = span + first + (tail - first) * i as f64 / TAIL_NODES as f64;
            if xi > *x.last().unwrap() {
                x.push(xi);
                b.push(b_end);
                db.push(0.0);
            }
        }
    }
    if x.len() < 2 {
        x.push(length.max(x[0] + 1e-6));
        b.push(b_end);
        db.push(0.0);
    }
    FieldProfile::with_derivatives(x, b, db)
}

/// η sampled on a grid.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EfficiencyProfile {
    pub x: Vec<f64>,
    pub eta: Vec<f64>,
}

impl EfficiencyProfile {
    fn in_range(&self, x0: f64, x1: f64) -> impl Iterator<Item = f64> + '_ {
        self.x.iter().zip(&self.eta).filter(move |(x, _)| **x >= x0 && **x <= x1).map(|(_, e)| *e)
    }

    /// Mean η over `[x0, x1]`, weighting samples equally.
    pub fn mean_over(&self, x0: f64, x1: f64) -> f64 {
        let (s, n) = self.in_range(x0, x1).fold((0.0, 0usize), |(s, n), e| (s + e, n + 1));
        if n == 0 {
            f64::NAN
        } else {
            s / n as f64
        }
    }

    pub fn max_over(&self, x0: f64, x1: f64) -> f64 {
        self.in_range(x0, x1).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_over(&self, x0: f64, x1: f64) -> f64 {
        self.in_range(x0, x1).fold(f64::INFINITY, f64::min)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("x_m,eta\n");
        for (x, e) in self.x.iter().zip(&self.eta) {
            out.push_str(&format!("{x:e},{e:e}\n"));
        }
        out
    }
}

/// η at a single point given B and dB/dx there.
#[inline]
pub fn efficiency_at(b: f64, db_dx: f64, laser: &LaserConfig, atom: &AtomState) -> f64 {
    let t = &laser.transition;
    let k = t.wavenumber();
    let c = 2.0 * atom.mass * atom.mu_eff / (HBAR * HBAR * k * k * k * t.linewidth);
    -c * db_dx * (atom.mu_eff * b / HBAR - laser.detuning)
}

/// η evaluated on the profile's own sample grid.
pub fn efficiency_profile(field: &FieldProfile, laser: &LaserConfig, atom: &AtomState) -> EfficiencyProfile {
    efficiency_on_grid(field, field.x_samples(), laser, atom)
}

/// η evaluated at arbitrary points.
pub fn efficiency_on_grid(field: &FieldProfile, xs: &[f64], laser: &LaserConfig, atom: &AtomState) -> EfficiencyProfile {
    let eta = xs
        .iter()
        .map(|&x| {
            let (b, db) = field.eval(x);
            efficiency_at(b, db, laser, atom)
        })
        .collect();
    EfficiencyProfile { x: xs.to_vec(), eta }
}
