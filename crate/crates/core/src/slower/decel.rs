//! Monte-Carlo deceleration along the slower axis and probe spectra.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, UnitSphere};
use serde::{Deserialize, Serialize};

use crate::ensemble::{Atom, Ensemble};
use crate::error::{Error, Result};
use crate::field::FieldProfile;
use crate::par;
use crate::physics::{scattering_rate, AtomState, LaserConfig, HBAR};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecelOptions {
    /// Largest integration step (s); steps shrink further near resonance.
    pub dt: f64,
    /// Relative per-step tolerance of the step-doubling error estimate.
    pub tolerance: f64,
    /// Poisson photon-number noise plus isotropic spontaneous-emission kicks.
    pub recoil_noise: bool,
    /// Give up on an atom after this long in the field (s).
    pub max_time: f64,
    /// Exit-velocity histogram bin (m/s).
    pub histogram_bin: f64,
}

impl Default for DecelOptions {
    fn default() -> Self {
        Self { dt: 1e-5, tolerance: 1e-6, recoil_noise: false, max_time: 0.1, histogram_bin: 5.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Histogram {
    pub lo: f64,
    pub bin: f64,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn from_values(values: impl Iterator<Item = f64>, lo: f64, hi: f64, bin: f64) -> Self {
        let n = ((hi - lo) / bin).ceil().max(1.0) as usize;
        let mut counts = vec![0u64; n];
        for v in values {
            let i = ((v - lo) / bin).floor();
            if i >= 0.0 && (i as usize) < n {
                counts[i as usize] += 1;
            }
        }
        Self { lo, bin, counts }
    }

    pub fn centers(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.counts.len()).map(|i| self.lo + (i as f64 + 0.5) * self.bin)
    }

    /// Center of the fullest bin.
    pub fn peak(&self) -> f64 {
        let (i, _) = self.counts.iter().enumerate().max_by_key(|(i, c)| (**c, std::cmp::Reverse(*i))).unwrap_or((0, &0));
        self.lo + (i as f64 + 0.5) * self.bin
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn to_csv(&self, value_header: &str) -> String {
        let mut out = format!("{value_header},count\n");
        for (c, n) in self.centers().zip(&self.counts) {
            out.push_str(&format!("{c:e},{n}\n"));
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExitKind {
    /// Left the downstream end of the field region.
    Exited,
    /// Longitudinal velocity reached zero inside the slower.
    Stopped,
    TimedOut,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecelResult {
    /// Atoms at the end of the field region (or where they stopped).
    pub ensemble: Ensemble,
    pub exit_kind: Vec<ExitKind>,
    /// Histogram of the longitudinal exit velocity.
    pub histogram: Histogram,
}

impl DecelResult {
    pub fn exit_velocities(&self) -> impl Iterator<Item = f64> + '_ {
        self.ensemble.atoms.iter().map(|a| a.vel[0])
    }
}

struct Model<'a> {
    field: &'a FieldProfile,
    gamma: f64,
    s: f64,
    k: f64,
    delta0: f64,
    mu_over_hbar: f64,
    /// ħk/m
    v_rec: f64,
}

impl Model<'_> {
    #[inline]
    fn rate(&self, x: f64, v: f64) -> f64 {
        let b = self.field.value(x);
        let delta = self.delta0 + self.k * v - self.mu_over_hbar * b;
        scattering_rate(self.gamma, self.s, delta)
    }

    #[inline]
    fn accel(&self, x: f64, v: f64) -> f64 {
        -self.v_rec * self.rate(x, v)
    }

    fn rk4(&self, x: f64, v: f64, h: f64) -> (f64, f64) {
        let a1 = self.accel(x, v);
        let (x2, v2) = (x + 0.5 * h * v, v + 0.5 * h * a1);
        let a2 = self.accel(x2, v2);
        let (x3, v3) = (x + 0.5 * h * v2, v + 0.5 * h * a2);
        let a3 = self.accel(x3, v3);
        let (x4, v4) = (x + h * v3, v + h * a3);
        let a4 = self.accel(x4, v4);
        (x + h / 6.0 * (v + 2.0 * v2 + 2.0 * v3 + v4), v + h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4))
    }
}

/// Integrates every atom through the field region `[field.x_min, field.x_max]`.
///
/// Each atom starts at the upstream end of the field with its own velocity
/// and feels the mean scattering force of the counter-propagating beam at
/// `δ_eff = δ₀ + k v − μ_eff B(x)/ħ`. Steps are capped at `opts.dt` and so
/// that δ_eff moves by less than Γ/4 per step, then refined by step
/// doubling. With `recoil_noise` the photon count per
/// step is Poisson-distributed and every spontaneous photon adds a random
/// recoil; atom `i` uses the seed `seed + i`.
pub fn decelerate(
    e: &Ensemble,
    field: &FieldProfile,
    laser: &LaserConfig,
    atom: &AtomState,
    opts: &DecelOptions,
    seed: u64,
) -> Result<DecelResult> {
    if !(opts.dt > 0.0) || !(opts.tolerance > 0.0) || !(opts.max_time > 0.0) || !(opts.histogram_bin > 0.0) {
        return Err(Error::invalid("deceleration step, tolerance, time limit and bin must be positive"));
    }
    let t = &laser.transition;
    let model = Model {
        field,
        gamma: t.linewidth,
        s: laser.saturation,
        k: t.wavenumber(),
        delta0: laser.detuning,
        mu_over_hbar: atom.mu_eff / HBAR,
        v_rec: HBAR * t.wavenumber() / atom.mass,
    };
    let h_max = opts.dt;
    let x_end = field.x_max();

    let results = par::map_indexed(&e.atoms, |i, a0| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
        let mut a = *a0;
        a.pos[0] = field.x_min();
        let kind = integrate_atom(&model, &mut a, x_end, h_max, opts, &mut rng);
        (a, kind)
    });
    let (atoms, exit_kind): (Vec<Atom>, Vec<ExitKind>) = results.into_iter().unzip();
    let vmax = atoms.iter().map(|a| a.vel[0]).fold(0.0f64, f64::max);
    let histogram = Histogram::from_values(atoms.iter().map(|a| a.vel[0]), 0.0, vmax + opts.histogram_bin, opts.histogram_bin);
    let mut ensemble = Ensemble::from_atoms(atoms);
    ensemble.atom_count = e.atom_count;
    ensemble.trappable_fraction = e.trappable_fraction;
    Ok(DecelResult { ensemble, exit_kind, histogram })
}

fn integrate_atom(
    m: &Model,
    a: &mut Atom,
    x_end: f64,
    h_max: f64,
    opts: &DecelOptions,
    rng: &mut ChaCha8Rng,
) -> ExitKind {
    let (mut x, mut v) = (a.pos[0], a.vel[0]);
    let mut time = 0.0;
    let mut h = h_max;
    let t0 = time;
    let kind = loop {
        if x >= x_end {
            break ExitKind::Exited;
        }
        if v <= 0.0 {
            break ExitKind::Stopped;
        }
        if time - t0 >= opts.max_time {
            break ExitKind::TimedOut;
        }
        if m.s == 0.0 {
            // No light: straight flight to the end.
            let dt = (x_end - x) / v;
            time += dt;
            x = x_end;
            continue;
        }
        // Keep the detuning change per step below a quarter linewidth so no
        // resonance is stepped over, and do not overshoot the exit by much.
        let (b, db) = m.field.eval(x);
        let acc = -m.v_rec * scattering_rate(m.gamma, m.s, m.delta0 + m.k * v - m.mu_over_hbar * b);
        let sweep = (m.k * acc - m.mu_over_hbar * db * v).abs();
        let h_res = if sweep > 0.0 { 0.25 * m.gamma / sweep } else { f64::INFINITY };
        let h_try = h.min(h_max).min(h_res).min(((x_end - x) / v).max(1e-12) * 1.0001);
        let (xf, vf) = m.rk4(x, v, h_try);
        let (xm, vm) = m.rk4(x, v, 0.5 * h_try);
        let (xh, vh) = m.rk4(xm, vm, 0.5 * h_try);
        let err = ((vh - vf).abs() / v.abs().max(1.0)).max((xh - xf).abs() / x.abs().max(1e-3));
        if err > opts.tolerance && h_try > 1e-12 {
            h = 0.5 * h_try;
            continue;
        }
        let (x_new, mut v_new) = (xh + (xh - xf) / 15.0, vh + (vh - vf) / 15.0);
        if opts.recoil_noise {
            let mean_photons = ((v - v_new) / m.v_rec).max(0.0);
            if mean_photons > 0.0 {
                let n = Poisson::new(mean_photons).map(|p| p.sample(rng)).unwrap_or(0.0);
                v_new += (mean_photons - n) * m.v_rec;
                for _ in 0..n as u64 {
                    let dir: [f64; 3] = UnitSphere.sample(rng);
                    v_new += m.v_rec * dir[0];
                    a.vel[1] += m.v_rec * dir[1];
                    a.vel[2] += m.v_rec * dir[2];
                }
            }
        }
        let dt = h_try;
        // Transverse positions drift with their velocities.
        a.pos[1] += a.vel[1] * dt;
        a.pos[2] += a.vel[2] * dt;
        time += dt;
        x = x_new;
        v = v_new;
        if err < opts.tolerance / 32.0 {
            h = (2.0 * h_try).min(h_max);
        }
    };
    a.pos[0] = x.min(x_end);
    a.vel[0] = v;
    kind
}

/// Doppler spectrum of a probe beam at `probe_angle` to the atomic beam.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Spectrum {
    /// Hz, bin centers of the Doppler shift
    pub frequency: Vec<f64>,
    /// Represented atoms per bin.
    pub signal: Vec<f64>,
}

impl Spectrum {
    pub fn peak_frequency(&self) -> f64 {
        let (i, _) = self.signal.iter().enumerate().fold((0, f64::NEG_INFINITY), |b, (i, &s)| if s > b.1 { (i, s) } else { b });
        self.frequency[i]
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("doppler_shift_hz,signal\n");
        for (f, s) in self.frequency.iter().zip(&self.signal) {
            out.push_str(&format!("{f:e},{s:e}\n"));
        }
        out
    }
}

/// Histogram of `v · cos(probe_angle) / λ` over `scan_range` (Hz).
pub fn probe_spectrum(
    e: &Ensemble,
    probe_angle: f64,
    wavelength: f64,
    scan_range: (f64, f64),
    bins: usize,
) -> Result<Spectrum> {
    if probe_angle.cos().abs() < 1e-12 {
        return Err(Error::invalid("probe perpendicular to the beam sees no Doppler shift"));
    }
    if bins == 0 || !(scan_range.1 > scan_range.0) || !(wavelength > 0.0) {
        return Err(Error::invalid("spectrum needs bins >= 1, an increasing scan range and a wavelength"));
    }
    let width = (scan_range.1 - scan_range.0) / bins as f64;
    let weight = if e.is_empty() { 0.0 } else { e.atom_count / e.len() as f64 };
    let mut signal = vec![0.0; bins];
    for a in &e.atoms {
        let f = a.vel[0] * probe_angle.cos() / wavelength;
        let i = ((f - scan_range.0) / width).floor();
        if i >= 0.0 && (i as usize) < bins {
            signal[i as usize] += weight;
        }
    }
    let frequency = (0..bins).map(|i| scan_range.0 + (i as f64 + 0.5) * width).collect();
    Ok(Spectrum { frequency, signal })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::{hz_to_angular, PhysicsSet};
    use crate::slower::design::{decelerating_span, resonant_field, target_field};

    fn setup(s: f64) -> (LaserConfig, AtomState) {
        let p = PhysicsSet::default();
        (LaserConfig::slowing_beam(p.line_1083, hz_to_angular(-370e6), s).unwrap(), p.atom)
    }

    fn beam(v: f64, n: usize) -> Ensemble {
        Ensemble::from_atoms(vec![Atom::new([0.0; 3], [v, 0.0, 0.0]); n])
    }

    #[test]
    fn no_light_no_change() {
        let (l, a) = setup(0.0);
        let f = target_field(800.0, 80.0, 1.36, 0.7, &l, &a).unwrap();
        let r = decelerate(&beam(750.0, 5), &f, &l, &a, &DecelOptions::default(), 1).unwrap();
        assert!(r.exit_velocities().all(|v| v == 750.0));
    }

    /// Target field with a negligible constant tail.
    fn tight_field(l: &LaserConfig, a: &AtomState) -> FieldProfile {
        let span = decelerating_span(800.0, 80.0, 0.7, l, a);
        target_field(800.0, 80.0, span * 1.0005, 0.7, l, a).unwrap()
    }

    #[test]
    fn ideal_field_slows_to_final_velocity() {
        let (l, a) = setup(20.0);
        let f = tight_field(&l, &a);
        let r = decelerate(&beam(790.0, 3), &f, &l, &a, &DecelOptions::default(), 1).unwrap();
        for v in r.exit_velocities() {
            assert!((60.0..95.0).contains(&v), "exit {v}");
        }
        assert!(r.exit_kind.iter().all(|k| *k == ExitKind::Exited));
    }

    #[test]
    fn fast_atoms_pass_untouched() {
        let (l, a) = setup(20.0);
        let f = target_field(800.0, 80.0, 1.36, 0.7, &l, &a).unwrap();
        let r = decelerate(&beam(1200.0, 2), &f, &l, &a, &DecelOptions::default(), 1).unwrap();
        assert!(r.exit_velocities().all(|v| (v - 1200.0).abs() < 0.02 * 1200.0));
    }

    #[test]
    fn noise_is_seeded() {
        let (l, a) = setup(20.0);
        let f = tight_field(&l, &a);
        let o = DecelOptions { recoil_noise: true, ..Default::default() };
        let r1 = decelerate(&beam(780.0, 4), &f, &l, &a, &o, 9).unwrap();
        let r2 = decelerate(&beam(780.0, 4), &f, &l, &a, &o, 9).unwrap();
        assert_eq!(r1.ensemble, r2.ensemble);
        assert!(r1.ensemble.atoms.iter().any(|at| at.vel[1] != 0.0));
        let mean = r1.exit_velocities().sum::<f64>() / 4.0;
        assert!((50.0..110.0).contains(&mean), "{mean}");
    }

    #[test]
    fn constant_tail_only_decelerates() {
        // Off-resonant scattering in the tail keeps slowing the atom, never speeds it up.
        let (l, a) = setup(20.0);
        let f = target_field(600.0, 200.0, 1.36, 0.7, &l, &a).unwrap();
        let b_end = resonant_field(200.0, &l, &a);
        assert!(f.b_samples().last().unwrap() - b_end < 1e-15);
        let r = decelerate(&beam(590.0, 1), &f, &l, &a, &DecelOptions::default(), 0).unwrap();
        let v = r.ensemble.atoms[0].vel[0];
        assert!(v > 0.0 && v < 200.0, "{v}");
        assert_eq!(r.exit_kind[0], ExitKind::Exited);
    }

    #[test]
    fn monokinetic_spectrum_peak() {
        let lambda = 1083.331e-9;
        let angle = 0.3f64;
        let e = beam(900.0, 100);
        let f0 = 900.0 * angle.cos() / lambda;
        let s = probe_spectrum(&e, angle, lambda, (0.0, 1.2e9), 1200).unwrap();
        assert!((s.peak_frequency() - f0).abs() <= 1e6);
        assert_eq!(s.signal.iter().sum::<f64>(), 100.0);
        assert!(probe_spectrum(&e, std::f64::consts::FRAC_PI_2, lambda, (0.0, 1.0), 1).is_err());
    }

    #[test]
    fn histogram_peak_and_total() {
        let h = Histogram::from_values([1.0, 2.0, 2.5, 7.0].into_iter(), 0.0, 10.0, 2.0);
        assert_eq!(h.counts, vec![1, 2, 0, 1, 0]);
        assert_eq!(h.peak(), 3.0);
        assert_eq!(h.total(), 4);
    }
}
