//! Magnetic-trap analysis, bias-field noise and the MOT-to-trap stage ledger.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::ensemble::{Atom, Ensemble};
use crate::error::{Error, Result};
use crate::par;
use crate::physics::{angular_to_hz, hz_to_angular, AtomState, K_B};

const GAUSS: f64 = 1e-4;

/// Ioffe-Pritchard trap described by its field expansion at the minimum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IoffeTrapParams {
    /// B′ (T/m)
    pub radial_gradient: f64,
    /// B″ (T/m²)
    pub axial_curvature: f64,
    /// B₀ (T)
    pub bias_field: f64,
}

impl IoffeTrapParams {
    /// From G/cm, G/cm² and G.
    pub fn from_gauss(gradient: f64, curvature: f64, bias: f64) -> Self {
        Self {
            radial_gradient: gradient * GAUSS / 1e-2,
            axial_curvature: curvature * GAUSS / 1e-4,
            bias_field: bias * GAUSS,
        }
    }

    /// The compressed trap: 95 G/cm, 11 G/cm², 2 G.
    pub fn compressed() -> Self {
        Self::from_gauss(95.0, 11.0, 2.0)
    }

    pub fn scaled(self, lambda: f64) -> Self {
        Self {
            radial_gradient: self.radial_gradient * lambda,
            axial_curvature: self.axial_curvature * lambda,
            bias_field: self.bias_field * lambda,
        }
    }
}

impl Default for IoffeTrapParams {
    fn default() -> Self {
        Self::compressed()
    }
}

/// Harmonic trap frequencies (rad/s). Axis convention: x axial, y and z radial.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrapFrequencies {
    pub omega_rad: f64,
    pub omega_ax: f64,
}

impl TrapFrequencies {
    pub fn from_hz(radial: f64, axial: f64) -> Self {
        Self { omega_rad: hz_to_angular(radial), omega_ax: hz_to_angular(axial) }
    }

    /// Trap right after loading: 32 Hz radial, 62 Hz axial.
    pub fn loading() -> Self {
        Self::from_hz(32.0, 62.0)
    }

    /// Reported compressed trap: 800 Hz radial, 47 Hz axial.
    pub fn compressed() -> Self {
        Self::from_hz(800.0, 47.0)
    }

    /// Per-axis ω in (x, y, z) order.
    pub fn axes(&self) -> [f64; 3] {
        [self.omega_ax, self.omega_rad, self.omega_rad]
    }

    /// Geometric mean (ω_rad² ω_ax)^{1/3}.
    pub fn mean(&self) -> f64 {
        (self.omega_rad * self.omega_rad * self.omega_ax).cbrt()
    }

    pub fn radial_hz(&self) -> f64 {
        angular_to_hz(self.omega_rad)
    }

    pub fn axial_hz(&self) -> f64 {
        angular_to_hz(self.omega_ax)
    }

    fn validate(&self) -> Result<()> {
        if !(self.omega_rad > 0.0 && self.omega_ax > 0.0) || !self.omega_rad.is_finite() || !self.omega_ax.is_finite() {
            return Err(Error::invalid("trap frequencies must be positive"));
        }
        Ok(())
    }
}

/// Harmonic frequencies of an Ioffe-Pritchard trap:
/// ω_ax = √(μB″/m), ω_rad = √((μ/m)(B′²/B₀ − B″/2)), with μ the trapped-state moment.
pub fn trap_frequencies(p: &IoffeTrapParams, atom: &AtomState) -> Result<TrapFrequencies> {
    let IoffeTrapParams { radial_gradient: g, axial_curvature: c, bias_field: b0 } = *p;
    if ![g, c, b0].iter().all(|v| v.is_finite()) || c < 0.0 {
        return Err(Error::invalid("trap parameters must be finite with non-negative curvature"));
    }
    let gradient_term = if g == 0.0 {
        0.0
    } else if b0 > 0.0 {
        g * g / b0
    } else {
        return Err(Error::invalid("a radial gradient needs a positive bias field"));
    };
    let curvature_term = c / 2.0;
    if gradient_term < curvature_term {
        return Err(Error::UnstableTrap { gradient_term, curvature_term });
    }
    let k = atom.trap_moment / atom.mass;
    Ok(TrapFrequencies { omega_rad: (k * (gradient_term - curvature_term)).sqrt(), omega_ax: (k * c).sqrt() })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseCorrelation {
    /// The two supplies fluctuate independently.
    #[default]
    Independent,
    /// Both fields carry the same fractional fluctuation.
    Correlated,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BiasNoise {
    /// T
    pub bias: f64,
    /// rms noise on the bias (T)
    pub abs_noise: f64,
    pub rel_bias_noise: f64,
}

/// Noise on a bias field formed as the difference of two large fields with
/// relative rms noise `rel_noise_rms` each.
pub fn bias_noise(b_large1: f64, b_large2: f64, rel_noise_rms: f64, corr: NoiseCorrelation) -> Result<BiasNoise> {
    if !(b_large2 > 0.0 && b_large1.is_finite()) {
        return Err(Error::invalid("both fields must be positive"));
    }
    if !(rel_noise_rms >= 0.0 && rel_noise_rms.is_finite()) {
        return Err(Error::invalid("relative noise must be non-negative"));
    }
    let bias = b_large1 - b_large2;
    if !(bias > 0.0) {
        return Err(Error::invalid(format!("bias field {bias:e} T is not positive")));
    }
    let abs_noise = match corr {
        NoiseCorrelation::Independent => rel_noise_rms * b_large1.hypot(b_large2),
        NoiseCorrelation::Correlated => rel_noise_rms * bias,
    };
    Ok(BiasNoise { bias, abs_noise, rel_bias_noise: abs_noise / bias })
}

/// One step of the preparation sequence.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StageSpec {
    /// Loaded MOT. Replaces the incoming bookkeeping with these numbers.
    Mot { atom_count: f64, temperature: f64, lifetime: f64, radius: f64, trappable_fraction: f64 },
    Molasses { temperature: f64, duration: f64 },
    /// Optical pumping into the trappable sublevel.
    SpinPolarization { enabled: bool, duration: f64 },
    /// Load into the magnetic trap; only the trappable fraction is kept.
    Transfer { efficiency: f64, lifetime: f64 },
    /// Cooling in the trap with background-gas loss over `duration`.
    DopplerCooling { temperature: f64, duration: f64, lifetime: f64 },
    /// Adiabatic change of trap frequencies (Hz).
    Compression { from_hz: [f64; 2], to_hz: [f64; 2] },
}

impl StageSpec {
    pub const NAMES: [&'static str; 6] =
        ["mot", "molasses", "spin_polarization", "transfer", "doppler_cooling", "compression"];

    /// Stage with its default parameters, looked up by name.
    pub fn by_name(name: &str) -> Result<Self> {
        Ok(match name {
            "mot" => StageSpec::Mot {
                atom_count: 6e8,
                temperature: 1.5e-3,
                lifetime: 0.19,
                radius: 1.9e-3,
                trappable_fraction: 1.0 / 3.0,
            },
            "molasses" => StageSpec::Molasses { temperature: 1e-3, duration: 0.3e-3 },
            "spin_polarization" => StageSpec::SpinPolarization { enabled: true, duration: 0.5e-3 },
            "transfer" => StageSpec::Transfer { efficiency: 0.9, lifetime: 61.0 },
            "doppler_cooling" => StageSpec::DopplerCooling { temperature: 150e-6, duration: 1.2, lifetime: 61.0 },
            "compression" => StageSpec::Compression { from_hz: [32.0, 62.0], to_hz: [800.0, 47.0] },
            other => return Err(Error::UnknownStage(other.to_string())),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            StageSpec::Mot { .. } => "mot",
            StageSpec::Molasses { .. } => "molasses",
            StageSpec::SpinPolarization { .. } => "spin_polarization",
            StageSpec::Transfer { .. } => "transfer",
            StageSpec::DopplerCooling { .. } => "doppler_cooling",
            StageSpec::Compression { .. } => "compression",
        }
    }

    /// MOT, molasses, spin polarization, transfer and in-trap Doppler cooling.
    pub fn default_sequence() -> Vec<Self> {
        ["mot", "molasses", "spin_polarization", "transfer", "doppler_cooling"]
            .iter()
            .map(|n| Self::by_name(n).expect("built-in stage"))
            .collect()
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            StageSpec::Mot { atom_count, temperature, lifetime, radius, trappable_fraction } => {
                atom_count >= 0.0
                    && temperature > 0.0
                    && lifetime > 0.0
                    && radius > 0.0
                    && (0.0..=1.0).contains(&trappable_fraction)
            }
            StageSpec::Molasses { temperature, duration } => temperature > 0.0 && duration >= 0.0,
            StageSpec::SpinPolarization { duration, .. } => duration >= 0.0,
            StageSpec::Transfer { efficiency, lifetime } => (0.0..=1.0).contains(&efficiency) && lifetime > 0.0,
            StageSpec::DopplerCooling { temperature, duration, lifetime } => {
                temperature > 0.0 && duration >= 0.0 && lifetime > 0.0
            }
            StageSpec::Compression { from_hz, to_hz } => from_hz.iter().chain(&to_hz).all(|f| *f > 0.0),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("{} stage parameters out of range: {self:?}", self.name())))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub stage_name: String,
    pub atom_count: f64,
    /// K
    pub temperature: f64,
    /// s
    pub duration: f64,
    /// s
    pub lifetime: Option<f64>,
    /// Factor applied to the atom count by this stage.
    pub multiplier: f64,
    pub notes: String,
}

/// Append-only record of the preparation sequence.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Ledger {
    pub entries: Vec<StageReport>,
}

impl Ledger {
    pub fn push(&mut self, r: StageReport) {
        self.entries.push(r);
    }

    pub fn multiplier_product(&self) -> f64 {
        self.entries.iter().map(|r| r.multiplier).product()
    }

    pub fn last(&self) -> Option<&StageReport> {
        self.entries.last()
    }

    /// CSV with header `stage,atom_count,temperature_k,duration_s,lifetime_s,multiplier,notes`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("stage,atom_count,temperature_k,duration_s,lifetime_s,multiplier,notes\n");
        for r in &self.entries {
            let lifetime = r.lifetime.map(|l| format!("{l:e}")).unwrap_or_default();
            out.push_str(&format!(
                "{},{:e},{:e},{:e},{},{:e},\"{}\"\n",
                r.stage_name,
                r.atom_count,
                r.temperature,
                r.duration,
                lifetime,
                r.multiplier,
                r.notes.replace('"', "'")
            ));
        }
        out
    }
}

/// Applies one stage. Velocities are redrawn from a Maxwell-Boltzmann
/// distribution at the new temperature; positions are kept except where noted.
pub fn apply_stage(e: &Ensemble, stage: &StageSpec, atom: &AtomState, seed: u64) -> Result<(Ensemble, StageReport)> {
    stage.validate()?;
    let mut out = e.clone();
    let report = |out: &Ensemble, duration, lifetime, multiplier, notes: String| StageReport {
        stage_name: stage.name().to_string(),
        atom_count: out.atom_count,
        temperature: out.temperature,
        duration,
        lifetime,
        multiplier,
        notes,
    };
    let r = match *stage {
        StageSpec::Mot { atom_count, temperature, lifetime, radius, trappable_fraction } => {
            let multiplier = if e.atom_count > 0.0 { atom_count / e.atom_count } else { 1.0 };
            out.atom_count = atom_count;
            out.temperature = temperature;
            out.trappable_fraction = trappable_fraction;
            out.atoms = thermal_samples(e.len(), [radius; 3], temperature, atom, seed);
            report(&out, 0.0, Some(lifetime), multiplier, format!("radius {:.2} mm", radius * 1e3))
        }
        StageSpec::Molasses { temperature, duration } => {
            out.temperature = temperature;
            redraw_velocities(&mut out, temperature, atom, seed);
            report(&out, duration, None, 1.0, String::new())
        }
        StageSpec::SpinPolarization { enabled, duration } => {
            if !enabled {
                report(&out, 0.0, None, 1.0, "disabled".into())
            } else {
                let gain = if e.trappable_fraction > 0.0 { 1.0 / e.trappable_fraction } else { 1.0 };
                out.trappable_fraction = 1.0;
                report(&out, duration, None, 1.0, format!("trappable atoms x{gain:.2}"))
            }
        }
        StageSpec::Transfer { efficiency, lifetime } => {
            let multiplier = efficiency * e.trappable_fraction;
            out.atom_count *= multiplier;
            out.trappable_fraction = 1.0;
            report(&out, 0.0, Some(lifetime), multiplier, format!("efficiency {efficiency}"))
        }
        StageSpec::DopplerCooling { temperature, duration, lifetime } => {
            let multiplier = (-duration / lifetime).exp();
            out.atom_count *= multiplier;
            out.temperature = temperature;
            redraw_velocities(&mut out, temperature, atom, seed);
            report(&out, duration, Some(lifetime), multiplier, String::new())
        }
        StageSpec::Compression { from_hz, to_hz } => {
            let from = TrapFrequencies::from_hz(from_hz[0], from_hz[1]);
            let to = TrapFrequencies::from_hz(to_hz[0], to_hz[1]);
            out = adiabatic_compress(e, &from, &to)?;
            let notes = format!("T x{:.4}", to.mean() / from.mean());
            report(&out, 0.0, None, 1.0, notes)
        }
    };
    Ok((out, r))
}

/// Runs `stages` in order, threading the ledger. Stage `i` is seeded with `seed + i`.
pub fn run_stages(e: &Ensemble, stages: &[StageSpec], atom: &AtomState, seed: u64) -> Result<(Ensemble, Ledger)> {
    let mut ledger = Ledger::default();
    let mut cur = e.clone();
    for (i, s) in stages.iter().enumerate() {
        let (next, r) = apply_stage(&cur, s, atom, seed.wrapping_add(i as u64))?;
        ledger.push(r);
        cur = next;
    }
    Ok((cur, ledger))
}

/// Adiabatic change of a harmonic trap at constant phase-space density:
/// T scales with ω̄. Samples are rethermalized by per-axis rescaling.
pub fn adiabatic_compress(e: &Ensemble, from: &TrapFrequencies, to: &TrapFrequencies) -> Result<Ensemble> {
    from.validate()?;
    to.validate()?;
    let ratio = to.mean() / from.mean();
    let mut out = e.clone();
    out.temperature = e.temperature * ratio;
    let sv = ratio.sqrt();
    let (wf, wt) = (from.axes(), to.axes());
    for a in &mut out.atoms {
        for k in 0..3 {
            a.pos[k] *= sv * wf[k] / wt[k];
            a.vel[k] *= sv;
        }
    }
    Ok(out)
}

/// Gaussian positions with per-axis rms `sigma` and thermal velocities.
pub fn thermal_samples(n: usize, sigma: [f64; 3], temperature: f64, atom: &AtomState, seed: u64) -> Vec<Atom> {
    let sv = (K_B * temperature / atom.mass).sqrt();
    par::map_range(n, |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
        let unit = Normal::new(0.0, 1.0).expect("unit normal");
        let pos = [0, 1, 2].map(|k| sigma[k] * unit.sample(&mut rng));
        let vel = [0; 3].map(|_| sv * unit.sample(&mut rng));
        Atom::new(pos, vel)
    })
}

/// Thermal cloud in a harmonic trap, rms size √(kT/mω²) per axis.
pub fn trapped_cloud(n: usize, atom_count: f64, temperature: f64, trap: &TrapFrequencies, atom: &AtomState, seed: u64) -> Ensemble {
    let sigma = trap.axes().map(|w| (K_B * temperature / atom.mass).sqrt() / w);
    let atoms = thermal_samples(n, sigma, temperature, atom, seed);
    Ensemble { atoms, atom_count, temperature, trappable_fraction: 1.0 }
}

fn redraw_velocities(e: &mut Ensemble, temperature: f64, atom: &AtomState, seed: u64) {
    let sv = (K_B * temperature / atom.mass).sqrt();
    let vels = par::map_range(e.len(), |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
        let unit = Normal::new(0.0, 1.0).expect("unit normal");
        [0; 3].map(|_| sv * unit.sample(&mut rng))
    });
    for (a, v) in e.atoms.iter_mut().zip(vels) {
        a.vel = v;
    }
}

/// Formula and values as text, for `trap-analyze`.
pub fn trap_report(p: &IoffeTrapParams, atom: &AtomState) -> Result<String> {
    let f = trap_frequencies(p, atom)?;
    Ok(format!(
        "radial gradient  {:.3} G/cm\naxial curvature  {:.3} G/cm^2\nbias field       {:.4} G\n\
         omega_ax  = sqrt(mu B''/m)                   -> {:.3} Hz\n\
         omega_rad = sqrt((mu/m)(B'^2/B0 - B''/2))    -> {:.3} Hz\n\
         mu = g_J mu_B m_J with m_J = 1\n",
        p.radial_gradient * 1e-2 / GAUSS,
        p.axial_curvature * 1e-4 / GAUSS,
        p.bias_field / GAUSS,
        f.axial_hz(),
        f.radial_hz(),
    ))
}
