//! Bimodal fit of a column-density cut: Gaussian plus integrated Thomas-Fermi parabola,
//! A_th exp(−(x−x₀)²/2σ²) + A_c max(0, 1 − (x−x₀)²/R²)^{3/2}.

use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::physics::{AtomState, K_B};

type Vec5 = SVector<f64, 5>;
type Mat5 = SMatrix<f64, 5, 5>;

const MIN_SAMPLES: usize = 50;
const MAX_ITER: usize = 300;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BimodalParams {
    pub thermal_amplitude: f64,
    /// m
    pub thermal_width: f64,
    pub condensate_amplitude: f64,
    /// m
    pub tf_radius: f64,
    /// m
    pub center: f64,
}

impl BimodalParams {
    fn to_vec(self) -> Vec5 {
        Vec5::new(self.thermal_amplitude, self.thermal_width, self.condensate_amplitude, self.tf_radius, self.center)
    }

    fn from_vec(v: &Vec5) -> Self {
        Self { thermal_amplitude: v[0], thermal_width: v[1], condensate_amplitude: v[2], tf_radius: v[3], center: v[4] }
    }

    /// Area under the thermal part of the cut.
    pub fn thermal_area(&self) -> f64 {
        self.thermal_amplitude * self.thermal_width * (2.0 * std::f64::consts::PI).sqrt()
    }

    /// Area under the condensate part of the cut (∫(1−u²)^{3/2} du = 3π/8).
    pub fn condensate_area(&self) -> f64 {
        self.condensate_amplitude * self.tf_radius * 3.0 * std::f64::consts::PI / 8.0
    }
}

pub fn bimodal_model(p: &BimodalParams, x: f64) -> f64 {
    let d = x - p.center;
    let g = p.thermal_amplitude * (-0.5 * (d / p.thermal_width).powi(2)).exp();
    let u = 1.0 - (d / p.tf_radius).powi(2);
    g + if u > 0.0 { p.condensate_amplitude * u.powf(1.5) } else { 0.0 }
}

fn model_and_gradient(v: &Vec5, x: f64) -> (f64, Vec5) {
    let (a, s, c, r, x0) = (v[0], v[1], v[2], v[3], v[4]);
    let d = x - x0;
    let e = (-0.5 * (d / s).powi(2)).exp();
    let mut grad = Vec5::new(e, a * e * d * d / (s * s * s), 0.0, 0.0, a * e * d / (s * s));
    let mut f = a * e;
    let u = 1.0 - (d / r).powi(2);
    if u > 0.0 {
        let su = u.sqrt();
        f += c * u * su;
        grad[2] = u * su;
        grad[3] = 3.0 * c * su * d * d / (r * r * r);
        grad[4] += 3.0 * c * su * d / (r * r);
    }
    (f, grad)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BimodalFit {
    pub params: BimodalParams,
    /// From the thermal width: T = mσ²/(k_B(t² + 1/ω²)).
    pub temperature: f64,
    /// Condensate share of the cut area.
    pub condensate_fraction: f64,
    pub rms_residual: f64,
    pub iterations: usize,
}

struct Outcome {
    v: Vec5,
    sse: f64,
    iterations: usize,
    converged: bool,
}

fn sse(v: &Vec5, x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(xi, yi)| (model_and_gradient(v, *xi).0 - yi).powi(2)).sum()
}

/// Amplitudes non-negative, widths bounded away from zero.
fn project(v: &mut Vec5, min_width: f64) {
    v[0] = v[0].max(0.0);
    v[2] = v[2].max(0.0);
    v[1] = v[1].abs().max(min_width);
    v[3] = v[3].abs().max(min_width);
}

fn levenberg_marquardt(start: Vec5, free: [bool; 5], x: &[f64], y: &[f64], min_width: f64) -> Outcome {
    let mut v = start;
    let mut cost = sse(&v, x, y);
    let mut lambda = 1e-3;
    for it in 1..=MAX_ITER {
        let mut jtj = Mat5::zeros();
        let mut jtr = Vec5::zeros();
        for (xi, yi) in x.iter().zip(y) {
            let (f, mut g) = model_and_gradient(&v, *xi);
            for k in 0..5 {
                if !free[k] {
                    g[k] = 0.0;
                }
            }
            jtj += g * g.transpose();
            jtr += g * (yi - f);
        }
        let mut improved = false;
        while lambda < 1e16 {
            let mut a = jtj;
            for k in 0..5 {
                a[(k, k)] = if free[k] { a[(k, k)] + lambda * jtj[(k, k)].max(1e-300) } else { 1.0 };
            }
            let Some(step) = a.cholesky().map(|c| c.solve(&jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let mut trial = v + step;
            project(&mut trial, min_width);
            let c = sse(&trial, x, y);
            if c <= cost {
                let small = (cost - c) <= 1e-15 * cost.max(1e-300)
                    || (0..5).all(|k| (trial[k] - v[k]).abs() <= 1e-12 * v[k].abs().max(min_width));
                v = trial;
                cost = c;
                lambda = (lambda / 10.0).max(1e-15);
                improved = true;
                if small {
                    return Outcome { v, sse: cost, iterations: it, converged: true };
                }
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            // No downhill step at any damping: a stationary point.
            return Outcome { v, sse: cost, iterations: it, converged: true };
        }
    }
    Outcome { v, sse: cost, iterations: MAX_ITER, converged: false }
}

/// Fits a 1D cut. `t_tof` and `omega` (trap frequency along the cut) convert the
/// thermal width into a temperature.
pub fn bimodal_fit(x: &[f64], y: &[f64], t_tof: f64, omega: f64, atom: &AtomState) -> Result<BimodalFit> {
    if x.len() < MIN_SAMPLES || x.len() != y.len() {
        return Err(Error::invalid(format!("bimodal fit needs at least {MIN_SAMPLES} matching samples")));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) || !(omega > 0.0) || !(t_tof >= 0.0) {
        return Err(Error::invalid("fit input must be finite with omega > 0 and t_tof >= 0"));
    }
    let wsum: f64 = y.iter().map(|v| v.max(0.0)).sum();
    if !(wsum > 0.0) {
        return Err(Error::invalid("profile has no positive signal"));
    }
    let x0 = x.iter().zip(y).map(|(a, b)| a * b.max(0.0)).sum::<f64>() / wsum;
    let width = (x.iter().zip(y).map(|(a, b)| (a - x0).powi(2) * b.max(0.0)).sum::<f64>() / wsum).sqrt();
    let peak = y.iter().cloned().fold(f64::MIN, f64::max);
    let span = x[x.len() - 1] - x[0];
    let min_width = 1e-6 * span.abs().max(f64::MIN_POSITIVE);

    let mut best: Option<Outcome> = None;
    for frac in [0.0, 0.3, 0.6, 0.85] {
        for (ws, rs) in [(1.0, 0.5), (1.2, 0.7), (1.5, 1.0), (1.0, 0.3)] {
            let start = Vec5::new((1.0 - frac) * peak, ws * width, frac * peak, rs * width, x0);
            let o = levenberg_marquardt(start, [true; 5], x, y, min_width);
            if best.as_ref().is_none_or(|b| o.sse < b.sse) {
                best = Some(o);
            }
        }
    }
    let mut best = best.expect("at least one start");
    // Keep the condensate only if it beats a pure Gaussian by more than its
    // two extra parameters are worth (Akaike criterion).
    let gauss_start = Vec5::new(peak, width, 0.0, 0.5 * width, x0);
    let gauss = levenberg_marquardt(gauss_start, [true, true, false, false, true], x, y, min_width);
    let n = x.len() as f64;
    if gauss.converged && n * (gauss.sse / best.sse.max(f64::MIN_POSITIVE)).ln() < 4.0 {
        best = gauss;
    }
    if !best.converged {
        return Err(Error::FitFailure { iterations: best.iterations, residual: (best.sse / x.len() as f64).sqrt() });
    }
    let params = BimodalParams::from_vec(&best.v);
    let (at, ac) = (params.thermal_area(), params.condensate_area());
    let condensate_fraction = if at + ac > 0.0 { ac / (at + ac) } else { 0.0 };
    let temperature = atom.mass * params.thermal_width.powi(2) / (K_B * (t_tof * t_tof + 1.0 / (omega * omega)));
    Ok(BimodalFit {
        params,
        temperature,
        condensate_fraction,
        rms_residual: (best.sse / x.len() as f64).sqrt(),
        iterations: best.iterations,
    })
}

impl BimodalFit {
    /// Parameters as a vector, for comparisons.
    pub fn as_array(&self) -> [f64; 5] {
        self.params.to_vec().into()
    }
}
