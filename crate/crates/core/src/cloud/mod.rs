//! Trapped-gas thermodynamics, evaporation, condensates, expansion and imaging.

pub mod evaporation;
pub mod fit;
pub mod imaging;
pub mod tof;

pub use evaporation::{evaporate, EvapOptions, EvapSample, EvapTrajectory, RampShape, RfRamp};
pub use fit::{bimodal_fit, bimodal_model, BimodalFit, BimodalParams};
pub use imaging::{recoil_detuning_curve, RecoilCurve};
pub use tof::{scaling_factors, tof_expand, ColumnDensity, Source};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::physics::{AtomState, HBAR, K_B, PLANCK};
use crate::traps::TrapFrequencies;

/// Ideal-gas condensation threshold for the peak phase-space density.
pub const BEC_PSD: f64 = 2.612;

/// Thermal de Broglie wavelength h/√(2π m k_B T).
pub fn de_broglie_wavelength(temperature: f64, atom: &AtomState) -> f64 {
    PLANCK / (2.0 * std::f64::consts::PI * atom.mass * K_B * temperature).sqrt()
}

/// Classical gas in a harmonic trap.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThermalCloud {
    pub atom_count: f64,
    /// K
    pub temperature: f64,
    pub trap: TrapFrequencies,
}

impl ThermalCloud {
    pub fn new(atom_count: f64, temperature: f64, trap: TrapFrequencies) -> Result<Self> {
        if !(atom_count >= 0.0 && temperature > 0.0 && atom_count.is_finite() && temperature.is_finite()) {
            return Err(Error::invalid("thermal cloud needs N >= 0 and T > 0"));
        }
        Ok(Self { atom_count, temperature, trap })
    }

    /// Peak density N ω̄³ (m/2πk_BT)^{3/2} (1/m³).
    pub fn peak_density(&self, atom: &AtomState) -> f64 {
        let w = self.trap.mean();
        self.atom_count * w.powi(3) * (atom.mass / (2.0 * std::f64::consts::PI * K_B * self.temperature)).powf(1.5)
    }

    /// In-trap rms size per axis (x axial, y and z radial).
    pub fn rms_size(&self, atom: &AtomState) -> [f64; 3] {
        self.trap.axes().map(|w| (K_B * self.temperature / atom.mass).sqrt() / w)
    }
}

/// Peak n₀λ_dB³, equal to N(ħω̄/k_BT)³ for a classical harmonic gas.
pub fn phase_space_density(c: &ThermalCloud, atom: &AtomState) -> f64 {
    c.peak_density(atom) * de_broglie_wavelength(c.temperature, atom).powi(3)
}

/// N(ħω̄/k_BT)³ without reference to the mass.
pub fn harmonic_psd(atom_count: f64, temperature: f64, trap: &TrapFrequencies) -> f64 {
    atom_count * (HBAR * trap.mean() / (K_B * temperature)).powi(3)
}

/// Thomas-Fermi condensate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Condensate {
    pub atom_count: f64,
    pub trap: TrapFrequencies,
    /// J
    pub chemical_potential: f64,
    /// Radii along (x, y, z) = (axial, radial, radial) (m).
    pub tf_radii: [f64; 3],
}

impl Condensate {
    pub fn radial_radius(&self) -> f64 {
        self.tf_radii[1]
    }

    pub fn axial_radius(&self) -> f64 {
        self.tf_radii[0]
    }
}

/// μ = (ħω̄/2)(15Na/ā)^{2/5} with ā = √(ħ/mω̄); R_i = √(2μ/mω_i²).
pub fn thomas_fermi(n_atoms: f64, trap: &TrapFrequencies, atom: &AtomState) -> Result<Condensate> {
    if !(n_atoms >= 1.0) || !(atom.scattering_length > 0.0) {
        return Err(Error::invalid("Thomas-Fermi needs N >= 1 and a positive scattering length"));
    }
    if !(trap.omega_rad > 0.0 && trap.omega_ax > 0.0) {
        return Err(Error::invalid("trap frequencies must be positive"));
    }
    let w = trap.mean();
    let a_ho = (HBAR / (atom.mass * w)).sqrt();
    let mu = 0.5 * HBAR * w * (15.0 * n_atoms * atom.scattering_length / a_ho).powf(0.4);
    let r = (2.0 * mu / atom.mass).sqrt();
    let tf_radii = trap.axes().map(|wi| r / wi);
    Ok(Condensate { atom_count: n_atoms, trap: *trap, chemical_potential: mu, tf_radii })
}
