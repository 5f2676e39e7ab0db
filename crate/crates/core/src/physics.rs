//! Physical constants, atomic data and laser configuration.
//!
//! Frequencies are angular (rad/s) everywhere inside the crate. Values quoted
//! in Hz are converted at the configuration boundary with [`hz_to_angular`].

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fundamental constants (SI, CODATA 2018).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Constants {
    pub hbar: f64,
    pub k_b: f64,
    pub mu_b: f64,
    pub g: f64,
    pub amu: f64,
    pub mu_0: f64,
}

pub const CONSTANTS: Constants = Constants {
    hbar: 1.054_571_817e-34,
    k_b: 1.380_649e-23,
    mu_b: 9.274_010_078_3e-24,
    g: 9.806_65,
    amu: 1.660_539_066_60e-27,
    mu_0: 1.256_637_062_12e-6,
};

pub const HBAR: f64 = CONSTANTS.hbar;
pub const K_B: f64 = CONSTANTS.k_b;
pub const MU_B: f64 = CONSTANTS.mu_b;
pub const G_STANDARD: f64 = CONSTANTS.g;
pub const AMU: f64 = CONSTANTS.amu;
pub const MU_0: f64 = CONSTANTS.mu_0;
pub const PLANCK: f64 = 2.0 * PI * HBAR;

/// 4He atomic mass in u.
pub const HELIUM4_MASS_U: f64 = 4.002_602;
/// Landé factor of 2³S₁.
pub const G_J_2S1: f64 = 2.002_237;
/// Landé factor of 2³P₂ (LS coupling).
pub const G_J_2P2: f64 = 1.5;
/// s-wave scattering length of spin-polarized He* (external source).
pub const HE_SCATTERING_LENGTH: f64 = 7.512e-9;

pub fn hz_to_angular(f_hz: f64) -> f64 {
    2.0 * PI * f_hz
}

pub fn angular_to_hz(omega: f64) -> f64 {
    omega / (2.0 * PI)
}

/// Species data for the trapped / slowed state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AtomState {
    /// kg
    pub mass: f64,
    /// Differential magnetic moment of the slowing transition (J/T); the
    /// Zeeman shift of the σ⁺ line is `mu_eff * B / ħ`.
    pub mu_eff: f64,
    /// Magnetic moment of the trapped low-field seeker, `g_J m_J μ_B` (J/T).
    pub trap_moment: f64,
    /// m
    pub scattering_length: f64,
}

impl AtomState {
    /// He* in 2³S₁, m_J = +1, slowed on the σ⁺ 2³S₁(m=1) → 2³P₂(m=2) line.
    pub fn helium_metastable() -> Self {
        Self {
            mass: HELIUM4_MASS_U * AMU,
            mu_eff: (2.0 * G_J_2P2 - G_J_2S1) * MU_B,
            trap_moment: G_J_2S1 * MU_B,
            scattering_length: HE_SCATTERING_LENGTH,
        }
    }

    pub fn new(mass: f64, mu_eff: f64, trap_moment: f64, scattering_length: f64) -> Result<Self> {
        if !(mass > 0.0) || !(mu_eff > 0.0) || !(trap_moment > 0.0) || !(scattering_length > 0.0) {
            return Err(Error::invalid("atom mass, moments and scattering length must be positive"));
        }
        Ok(Self { mass, mu_eff, trap_moment, scattering_length })
    }

    pub fn with_scattering_length(mut self, a: f64) -> Self {
        self.scattering_length = a;
        self
    }
}

/// A closed optical transition.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Transition {
    /// m
    pub wavelength: f64,
    /// Angular natural linewidth Γ (rad/s).
    pub linewidth: f64,
    /// W/m²
    pub saturation_intensity: f64,
    /// ħk/m (m/s), cached for the mass given at construction.
    pub recoil_velocity: f64,
}

impl Transition {
    pub fn new(wavelength: f64, linewidth: f64, saturation_intensity: f64, mass: f64) -> Result<Self> {
        if !(wavelength > 0.0) || !(linewidth > 0.0) || !(saturation_intensity > 0.0) || !(mass > 0.0) {
            return Err(Error::invalid("transition parameters must be positive"));
        }
        Ok(Self {
            wavelength,
            linewidth,
            saturation_intensity,
            recoil_velocity: 2.0 * PI / wavelength * HBAR / mass,
        })
    }

    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.wavelength
    }

    /// 2³S₁ → 2³P₂ at 1083 nm; Γ fixed from the MOT detuning quoted as
    /// both −26.5 Γ and −43 MHz.
    pub fn helium_1083(atom: &AtomState) -> Self {
        let gamma = gamma_from_detuning_multiple(-43.0e6, -26.5).expect("nonzero multiple");
        Self::new(1083.331e-9, gamma, 1.6, atom.mass).expect("valid constants")
    }

    /// 2³S₁ → 3³P₂ at 389 nm. Γ/2π = 1.4915 MHz and I_s = 33.1 W/m² are
    /// external literature values.
    pub fn helium_389(atom: &AtomState) -> Self {
        Self::new(388.975e-9, hz_to_angular(1.4915e6), 33.1, atom.mass).expect("valid constants")
    }

    pub fn with_linewidth(self, linewidth: f64, mass: f64) -> Result<Self> {
        Self::new(self.wavelength, linewidth, self.saturation_intensity, mass)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarization {
    SigmaPlus,
    SigmaMinus,
    Pi,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LaserConfig {
    pub transition: Transition,
    /// Angular detuning from the unshifted resonance (rad/s).
    pub detuning: f64,
    /// I / I_s
    pub saturation: f64,
    pub polarization: Polarization,
    pub direction: [f64; 3],
}

impl LaserConfig {
    pub fn new(
        transition: Transition,
        detuning: f64,
        saturation: f64,
        polarization: Polarization,
        direction: [f64; 3],
    ) -> Result<Self> {
        if !(saturation >= 0.0) {
            return Err(Error::invalid("saturation parameter must be non-negative"));
        }
        let norm = direction.iter().map(|c| c * c).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("laser direction must be a unit vector (norm {norm})")));
        }
        Ok(Self { transition, detuning, saturation, polarization, direction })
    }

    /// σ⁺ slowing beam counter-propagating to an atomic beam along +x.
    pub fn slowing_beam(transition: Transition, detuning: f64, saturation: f64) -> Result<Self> {
        Self::new(transition, detuning, saturation, Polarization::SigmaPlus, [-1.0, 0.0, 0.0])
    }

    pub fn with_saturation(mut self, s: f64) -> Self {
        self.saturation = s.max(0.0);
        self
    }
}

/// Angular linewidth from a detuning quoted both in Hz and in units of Γ.
pub fn gamma_from_detuning_multiple(detuning_hz: f64, gamma_multiples: f64) -> Result<f64> {
    if gamma_multiples == 0.0 || !gamma_multiples.is_finite() {
        return Err(Error::invalid("detuning must be quoted as a nonzero multiple of the linewidth"));
    }
    Ok(2.0 * PI * (detuning_hz / gamma_multiples).abs())
}

/// Two-level scattering rate `(Γ/2) s / (1 + s + (2δ/Γ)²)` at the effective
/// detuning `laser.detuning + doppler_zeeman_shift`.
pub fn saturation_scattering_rate(laser: &LaserConfig, doppler_zeeman_shift: f64) -> f64 {
    scattering_rate(
        laser.transition.linewidth,
        laser.saturation,
        laser.detuning + doppler_zeeman_shift,
    )
}

#[inline]
pub(crate) fn scattering_rate(gamma: f64, s: f64, delta: f64) -> f64 {
    let x = 2.0 * delta / gamma;
    0.5 * gamma * s / (1.0 + s + x * x)
}

/// Where a tabulated value comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    Codata,
    /// Derived from numbers reported for the apparatus.
    Apparatus,
    /// Literature value not reported for the apparatus.
    External,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::Codata => "CODATA 2018",
            Provenance::Apparatus => "apparatus",
            Provenance::External => "external source",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConstantEntry {
    pub symbol: &'static str,
    pub value: f64,
    pub unit: &'static str,
    pub provenance: Provenance,
}

/// The species and transition set shared by every module.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhysicsSet {
    pub atom: AtomState,
    pub line_1083: Transition,
    pub line_389: Transition,
}

impl Default for PhysicsSet {
    fn default() -> Self {
        let atom = AtomState::helium_metastable();
        Self { atom, line_1083: Transition::helium_1083(&atom), line_389: Transition::helium_389(&atom) }
    }
}

impl PhysicsSet {
    /// Human-readable table of every constant in use.
    pub fn constants_table(&self) -> Vec<ConstantEntry> {
        use Provenance::*;
        let e = |symbol, value, unit, provenance| ConstantEntry { symbol, value, unit, provenance };
        vec![
            e("hbar", HBAR, "J s", Codata),
            e("k_B", K_B, "J/K", Codata),
            e("mu_B", MU_B, "J/T", Codata),
            e("g", G_STANDARD, "m/s^2", Codata),
            e("amu", AMU, "kg", Codata),
            e("mu_0", MU_0, "N/A^2", Codata),
            e("m_He", self.atom.mass, "kg", Codata),
            e("mu_eff", self.atom.mu_eff, "J/T", External),
            e("mu_trap", self.atom.trap_moment, "J/T", External),
            e("a_s", self.atom.scattering_length, "m", External),
            e("lambda_1083", self.line_1083.wavelength, "m", External),
            e("Gamma_1083", self.line_1083.linewidth, "rad/s", Apparatus),
            e("I_s_1083", self.line_1083.saturation_intensity, "W/m^2", External),
            e("v_rec_1083", self.line_1083.recoil_velocity, "m/s", Apparatus),
            e("lambda_389", self.line_389.wavelength, "m", External),
            e("Gamma_389", self.line_389.linewidth, "rad/s", External),
            e("I_s_389", self.line_389.saturation_intensity, "W/m^2", External),
            e("v_rec_389", self.line_389.recoil_velocity, "m/s", External),
        ]
    }

    pub fn constants_csv(&self) -> String {
        let mut out = String::from("symbol,value,unit,provenance\n");
        for c in self.constants_table() {
            out.push_str(&format!("{},{:.9e},{},{}\n", c.symbol, c.value, c.unit, c.provenance));
        }
        out
    }
}
