//! Source-exit atomic beam and transverse laser collimation.
//!
//! The beam propagates along +x. Speeds follow a Gaussian around the peak
//! velocity (truncated at zero), a stand-in for the shifted
//! Maxwell-Boltzmann distribution of a supersonic source; directions are
//! uniform in solid angle inside the divergence cone.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::ensemble::{Atom, Ensemble};
use crate::error::{Error, Result};
use crate::par;

/// Samples drawn per RNG stream; chunk `i` is seeded with `seed + i`.
pub const SAMPLE_CHUNK: usize = 4096;

const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SourceSpec {
    /// m/s
    pub peak_velocity: f64,
    /// m/s
    pub velocity_spread_fwhm: f64,
    /// atoms/(sr s)
    pub flux_per_sr: f64,
    /// rad
    pub divergence_halfangle: f64,
}

impl Default for SourceSpec {
    fn default() -> Self {
        Self { peak_velocity: 800.0, velocity_spread_fwhm: 400.0, flux_per_sr: 4e14, divergence_halfangle: 0.1 }
    }
}

impl SourceSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.peak_velocity > 0.0)
            || !(self.velocity_spread_fwhm >= 0.0)
            || !(self.flux_per_sr > 0.0)
            || !(self.divergence_halfangle >= 0.0)
            || self.divergence_halfangle > std::f64::consts::PI
        {
            return Err(Error::invalid("source: velocities and flux must be positive, divergence in [0, pi]"));
        }
        Ok(())
    }

    /// Soft-limit diagnostics (the model is meant for 300 to 1500 m/s).
    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if !(300.0..=1500.0).contains(&self.peak_velocity) {
            w.push(format!("peak velocity {} m/s outside the 300-1500 m/s validity window", self.peak_velocity));
        }
        w
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CollimatorSpec {
    /// rad
    pub capture_halfangle: f64,
    /// Target on-axis flux multiplier.
    pub gain: f64,
    /// m, mirror radius (geometry record only)
    pub radius_of_curvature: f64,
    pub n_reflections: u32,
}

impl Default for CollimatorSpec {
    fn default() -> Self {
        Self { capture_halfangle: 0.020, gain: 30.0, radius_of_curvature: 7.0, n_reflections: 12 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CollimationReport {
    /// On-axis flux multiplier measured on the sample.
    pub gain: f64,
    pub captured: usize,
    pub total: usize,
}

impl CollimationReport {
    pub fn captured_fraction(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.captured as f64 / self.total as f64
        }
    }

    /// Collimated on-axis flux (atoms/(sr s)).
    pub fn on_axis_flux(&self, flux_per_sr: f64) -> f64 {
        flux_per_sr * self.gain
    }
}

/// Draws `n` atoms leaving the source at the origin.
pub fn sample_source(spec: &SourceSpec, n: usize, seed: u64) -> Result<Ensemble> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::invalid("sample_source needs n >= 1"));
    }
    let sigma = spec.velocity_spread_fwhm / FWHM_PER_SIGMA;
    let cos_max = spec.divergence_halfangle.cos();
    let n_chunks = n.div_ceil(SAMPLE_CHUNK);
    let chunks = par::map_range(n_chunks, |c| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(c as u64));
        let len = SAMPLE_CHUNK.min(n - c * SAMPLE_CHUNK);
        let normal = Normal::new(spec.peak_velocity, sigma.max(f64::MIN_POSITIVE)).expect("finite sigma");
        (0..len)
            .map(|_| {
                let speed = if sigma == 0.0 {
                    spec.peak_velocity
                } else {
                    loop {
                        let v = normal.sample(&mut rng);
                        if v > 0.0 {
                            break v;
                        }
                    }
                };
                let cos_t = 1.0 - rng.random::<f64>() * (1.0 - cos_max);
                let sin_t = (1.0 - cos_t * cos_t).max(0.0).sqrt();
                let phi = rng.random::<f64>() * std::f64::consts::TAU;
                Atom::new([0.0; 3], [speed * cos_t, speed * sin_t * phi.cos(), speed * sin_t * phi.sin()])
            })
            .collect::<Vec<_>>()
    });
    Ok(Ensemble::from_atoms(chunks.concat()))
}

fn polar_angle(a: &Atom) -> f64 {
    let t = (a.vel[1] * a.vel[1] + a.vel[2] * a.vel[2]).sqrt();
    t.atan2(a.vel[0])
}

/// Compresses the transverse velocity of captured atoms by `1/sqrt(gain)`.
///
/// The reported gain is the ratio of atoms inside the capture cone to atoms
/// inside the compressed cone before collimation, i.e. the on-axis
/// solid-angle density increase realised on this sample.
pub fn apply_collimation(e: &Ensemble, c: &CollimatorSpec) -> Result<(Ensemble, CollimationReport)> {
    if !(c.gain >= 1.0) || !(c.capture_halfangle >= 0.0) {
        return Err(Error::invalid("collimator gain must be >= 1 and capture angle >= 0"));
    }
    let total = e.len();
    if c.capture_halfangle == 0.0 {
        return Ok((e.clone(), CollimationReport { gain: 1.0, captured: 0, total }));
    }
    let scale = 1.0 / c.gain.sqrt();
    let compressed_angle = (scale * c.capture_halfangle.tan()).atan();
    let mut captured = 0;
    let mut inner = 0;
    let mut out = e.clone();
    for a in &mut out.atoms {
        let th = polar_angle(a);
        if th <= compressed_angle {
            inner += 1;
        }
        if th <= c.capture_halfangle {
            captured += 1;
            a.vel[1] *= scale;
            a.vel[2] *= scale;
        }
    }
    let gain = if inner == 0 { if captured == 0 { 1.0 } else { c.gain } } else { captured as f64 / inner as f64 };
    Ok((out, CollimationReport { gain, captured, total }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mode(speeds: &[f64], bin: f64) -> f64 {
        let max = speeds.iter().cloned().fold(0.0, f64::max);
        let mut h = vec![0usize; (max / bin) as usize + 1];
        for &s in speeds {
            h[(s / bin) as usize] += 1;
        }
        let (i, _) = h.iter().enumerate().max_by_key(|(_, c)| **c).unwrap();
        (i as f64 + 0.5) * bin
    }

    #[test]
    fn sample_mode_near_peak() {
        let e = sample_source(&SourceSpec::default(), 100_000, 1).unwrap();
        let speeds: Vec<f64> = e.atoms.iter().map(Atom::speed).collect();
        assert!((mode(&speeds, 20.0) - 800.0).abs() <= 10.0 + 10.0);
        let mean = speeds.iter().sum::<f64>() / speeds.len() as f64;
        assert!((mean - 800.0).abs() < 5.0);
    }

    #[test]
    fn zero_spread_is_monokinetic() {
        let spec = SourceSpec { velocity_spread_fwhm: 0.0, ..Default::default() };
        let e = sample_source(&spec, 1000, 3).unwrap();
        assert!(e.atoms.iter().all(|a| (a.speed() - 800.0).abs() < 1e-9));
    }

    #[test]
    fn same_seed_same_ensemble() {
        let a = sample_source(&SourceSpec::default(), 10_000, 42).unwrap();
        let b = sample_source(&SourceSpec::default(), 10_000, 42).unwrap();
        assert_eq!(a, b);
        let c = sample_source(&SourceSpec::default(), 10_000, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn zero_atoms_rejected() {
        assert!(sample_source(&SourceSpec::default(), 0, 0).is_err());
    }

    #[test]
    fn default_collimator_gain() {
        let e = sample_source(&SourceSpec::default(), 200_000, 5).unwrap();
        let (_, r) = apply_collimation(&e, &CollimatorSpec::default()).unwrap();
        assert!((20.0..=40.0).contains(&r.gain), "gain {}", r.gain);
        assert_eq!(r.on_axis_flux(2.0), 2.0 * r.gain);
    }

    #[test]
    fn zero_capture_is_identity() {
        let e = sample_source(&SourceSpec::default(), 1000, 5).unwrap();
        let c = CollimatorSpec { capture_halfangle: 0.0, ..Default::default() };
        let (out, r) = apply_collimation(&e, &c).unwrap();
        assert_eq!(out, e);
        assert_eq!(r.gain, 1.0);
    }

    #[test]
    fn captured_fraction_matches_solid_angle() {
        let spec = SourceSpec { divergence_halfangle: 0.1, ..Default::default() };
        let n = 100_000;
        let e = sample_source(&spec, n, 9).unwrap();
        let (_, r) = apply_collimation(&e, &CollimatorSpec::default()).unwrap();
        let p = (1.0 - 0.020f64.cos()) / (1.0 - 0.1f64.cos());
        let expected = p * n as f64;
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        assert!((r.captured as f64 - expected).abs() < 3.0 * sigma);
    }

    #[test]
    fn collimation_never_speeds_up_and_keeps_vx() {
        let e = sample_source(&SourceSpec::default(), 5000, 2).unwrap();
        let (out, _) = apply_collimation(&e, &CollimatorSpec::default()).unwrap();
        for (a, b) in e.atoms.iter().zip(&out.atoms) {
            assert!(b.speed() <= a.speed() + 1e-12);
            assert_eq!(a.vel[0], b.vel[0]);
        }
    }
}
