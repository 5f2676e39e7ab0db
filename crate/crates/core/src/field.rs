//! Sampled on-axis magnetic field with derivative access.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    Linear,
    /// Cubic Hermite on node slopes. Slopes are either supplied analytically
    /// or taken from a natural cubic spline through the samples.
    Cubic,
}

/// B(x) on a strictly increasing grid. Outside the grid the field is held at
/// the end value with zero derivative.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldProfile {
    x: Vec<f64>,
    b: Vec<f64>,
    slope: Vec<f64>,
    interpolation: Interpolation,
    /// (x0, 1/h) when the grid is uniform, for O(1) segment lookup.
    uniform: Option<(f64, f64)>,
}

impl FieldProfile {
    pub fn new(x: Vec<f64>, b: Vec<f64>, interpolation: Interpolation) -> Result<Self> {
        validate(&x, &b)?;
        let slope = match interpolation {
            Interpolation::Linear => linear_slopes(&x, &b),
            Interpolation::Cubic => natural_spline_slopes(&x, &b),
        };
        let uniform = uniform_grid(&x);
        Ok(Self { x, b, slope, interpolation, uniform })
    }

    /// Cubic Hermite profile with known dB/dx at the nodes.
    pub fn with_derivatives(x: Vec<f64>, b: Vec<f64>, db_dx: Vec<f64>) -> Result<Self> {
        validate(&x, &b)?;
        if db_dx.len() != x.len() || db_dx.iter().any(|d| !d.is_finite()) {
            return Err(Error::invalid("derivative samples must match the grid and be finite"));
        }
        let uniform = uniform_grid(&x);
        Ok(Self { x, b, slope: db_dx, interpolation: Interpolation::Cubic, uniform })
    }

    /// Samples `f` and its derivative `df` on `n` uniform points of [x0, x1].
    pub fn sample(x0: f64, x1: f64, n: usize, f: impl Fn(f64) -> f64, df: impl Fn(f64) -> f64) -> Result<Self> {
        if n < 2 || !(x1 > x0) {
            return Err(Error::invalid("sampling needs n >= 2 and x1 > x0"));
        }
        let x: Vec<f64> = (0..n).map(|i| x0 + (x1 - x0) * i as f64 / (n - 1) as f64).collect();
        let b = x.iter().map(|&xi| f(xi)).collect();
        let d = x.iter().map(|&xi| df(xi)).collect();
        Self::with_derivatives(x, b, d)
    }

    pub fn x_samples(&self) -> &[f64] {
        &self.x
    }

    pub fn b_samples(&self) -> &[f64] {
        &self.b
    }

    pub fn interpolation(&self) -> Interpolation {
        self.interpolation
    }

    pub fn x_min(&self) -> f64 {
        self.x[0]
    }

    pub fn x_max(&self) -> f64 {
        self.x[self.x.len() - 1]
    }

    pub fn max_abs(&self) -> f64 {
        self.b.iter().fold(0.0, |m, b| m.max(b.abs()))
    }

    fn segment(&self, x: f64) -> usize {
        if let Some((x0, inv_h)) = self.uniform {
            let guess = (((x - x0) * inv_h) as usize).min(self.x.len() - 2);
            // Guard against rounding at segment edges.
            if self.x[guess] <= x && x < self.x[guess + 1] {
                return guess;
            }
        }
        let i = self.x.partition_point(|&xi| xi <= x);
        i.clamp(1, self.x.len() - 1) - 1
    }

    /// B at `x` (T).
    pub fn value(&self, x: f64) -> f64 {
        self.eval(x).0
    }

    /// dB/dx at `x` (T/m).
    pub fn derivative(&self, x: f64) -> f64 {
        self.eval(x).1
    }

    /// (B, dB/dx) at `x`.
    pub fn eval(&self, x: f64) -> (f64, f64) {
        let n = self.x.len();
        if x <= self.x[0] {
            return (self.b[0], if x == self.x[0] { self.slope[0] } else { 0.0 });
        }
        if x >= self.x[n - 1] {
            return (self.b[n - 1], if x == self.x[n - 1] { self.slope[n - 1] } else { 0.0 });
        }
        let i = self.segment(x);
        let (x0, x1) = (self.x[i], self.x[i + 1]);
        let (b0, b1) = (self.b[i], self.b[i + 1]);
        let h = x1 - x0;
        match self.interpolation {
            Interpolation::Linear => {
                let s = (b1 - b0) / h;
                (b0 + s * (x - x0), s)
            }
            Interpolation::Cubic => {
                let (m0, m1) = (self.slope[i] * h, self.slope[i + 1] * h);
                let t = (x - x0) / h;
                let t2 = t * t;
                let t3 = t2 * t;
                let v = (2.0 * t3 - 3.0 * t2 + 1.0) * b0
                    + (t3 - 2.0 * t2 + t) * m0
                    + (-2.0 * t3 + 3.0 * t2) * b1
                    + (t3 - t2) * m1;
                let dv = (6.0 * t2 - 6.0 * t) * b0
                    + (3.0 * t2 - 4.0 * t + 1.0) * m0
                    + (-6.0 * t2 + 6.0 * t) * b1
                    + (3.0 * t2 - 2.0 * t) * m1;
                (v, dv / h)
            }
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("x_m,b_t\n");
        for (x, b) in self.x.iter().zip(&self.b) {
            out.push_str(&format!("{x:e},{b:e}\n"));
        }
        out
    }
}

fn uniform_grid(x: &[f64]) -> Option<(f64, f64)> {
    let n = x.len();
    let h = (x[n - 1] - x[0]) / (n - 1) as f64;
    let uniform = x.iter().enumerate().all(|(i, &xi)| (xi - (x[0] + i as f64 * h)).abs() <= 1e-9 * h);
    uniform.then(|| (x[0], 1.0 / h))
}

fn validate(x: &[f64], b: &[f64]) -> Result<()> {
    if x.len() < 2 || x.len() != b.len() {
        return Err(Error::invalid("field profile needs at least two samples of matching length"));
    }
    if x.windows(2).any(|w| !(w[1] > w[0])) || x.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("field grid must be finite and strictly increasing"));
    }
    if b.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("field samples must be finite"));
    }
    Ok(())
}

fn linear_slopes(x: &[f64], b: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut s: Vec<f64> = x.windows(2).zip(b.windows(2)).map(|(xw, bw)| (bw[1] - bw[0]) / (xw[1] - xw[0])).collect();
    s.push(s[n - 2]);
    s
}

/// Node slopes of the natural cubic spline (zero end curvature).
fn natural_spline_slopes(x: &[f64], b: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n == 2 {
        return linear_slopes(x, b);
    }
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    // Tridiagonal system for interior second derivatives (Thomas algorithm).
    let m = n - 2;
    let mut diag = vec![0.0; m];
    let mut rhs = vec![0.0; m];
    let mut upper = vec![0.0; m];
    for k in 0..m {
        let i = k + 1;
        diag[k] = 2.0 * (h[i - 1] + h[i]);
        upper[k] = h[i];
        rhs[k] = 6.0 * ((b[i + 1] - b[i]) / h[i] - (b[i] - b[i - 1]) / h[i - 1]);
    }
    for k in 1..m {
        let w = h[k] / diag[k - 1];
        diag[k] -= w * upper[k - 1];
        rhs[k] -= w * rhs[k - 1];
    }
    let mut curv = vec![0.0; n];
    for k in (0..m).rev() {
        let next = if k + 1 < m { curv[k + 2] } else { 0.0 };
        curv[k + 1] = (rhs[k] - upper[k] * next) / diag[k];
    }
    let mut s = vec![0.0; n];
    for i in 0..n - 1 {
        s[i] = (b[i + 1] - b[i]) / h[i] - h[i] * (2.0 * curv[i] + curv[i + 1]) / 6.0;
    }
    s[n - 1] = (b[n - 1] - b[n - 2]) / h[n - 2] + h[n - 2] * (curv[n - 2] + 2.0 * curv[n - 1]) / 6.0;
    s
}
