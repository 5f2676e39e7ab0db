//! Ballistic expansion after release, imaged along y onto the x-z plane.
//!
//! Axes: x axial, y radial (imaging direction), z radial and vertical with
//! gravity along +z. Thermal clouds expand as σ²(t) = σ²(0) + k_B T t²/m; a
//! condensate follows the Thomas-Fermi scaling solution
//! λ̈ᵢ = ωᵢ² / (λᵢ λₓλᵧλ_z), Rᵢ(t) = λᵢ(t) Rᵢ(0).

use serde::{Deserialize, Serialize};

use super::{Condensate, ThermalCloud};
use crate::error::{Error, Result};
use crate::physics::{AtomState, G_STANDARD, K_B};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Source {
    Thermal(ThermalCloud),
    Condensate(Condensate),
    /// Condensate surrounded by a thermal component.
    Mixed { condensate: Condensate, thermal: ThermalCloud },
}

impl Source {
    pub fn atom_count(&self) -> f64 {
        match self {
            Source::Thermal(c) => c.atom_count,
            Source::Condensate(c) => c.atom_count,
            Source::Mixed { condensate, thermal } => condensate.atom_count + thermal.atom_count,
        }
    }

    /// Vertical over axial size at time `t`: Thomas-Fermi radii when a
    /// condensate is present, rms widths otherwise.
    pub fn aspect_ratio(&self, t: f64, atom: &AtomState) -> f64 {
        match self {
            Source::Thermal(c) => {
                let s = thermal_widths(c, t, atom);
                s[2] / s[0]
            }
            Source::Condensate(c) | Source::Mixed { condensate: c, .. } => {
                let r = condensate_radii(c, t);
                r[2] / r[0]
            }
        }
    }
}

/// rms widths (x, y, z) of a released thermal cloud.
pub fn thermal_widths(c: &ThermalCloud, t: f64, atom: &AtomState) -> [f64; 3] {
    let v2 = K_B * c.temperature / atom.mass;
    c.rms_size(atom).map(|s| (s * s + v2 * t * t).sqrt())
}

/// Scale factors λᵢ(t) of the Thomas-Fermi scaling solution.
pub fn scaling_factors(trap_axes: [f64; 3], t: f64) -> [f64; 3] {
    if t <= 0.0 {
        return [1.0; 3];
    }
    let w_max = trap_axes.iter().cloned().fold(0.0, f64::max);
    let steps = ((t * w_max / 2e-3).ceil() as usize).max(1000);
    let h = t / steps as f64;
    let w2 = trap_axes.map(|w| w * w);
    let rhs = |s: &[f64; 6]| -> [f64; 6] {
        let p = s[0] * s[1] * s[2];
        [s[3], s[4], s[5], w2[0] / (s[0] * p), w2[1] / (s[1] * p), w2[2] / (s[2] * p)]
    };
    let mut s = [1.0, 1.0, 1.0, 0.0, 0.0, 0.0];
    for _ in 0..steps {
        let k1 = rhs(&s);
        let k2 = rhs(&std::array::from_fn(|i| s[i] + 0.5 * h * k1[i]));
        let k3 = rhs(&std::array::from_fn(|i| s[i] + 0.5 * h * k2[i]));
        let k4 = rhs(&std::array::from_fn(|i| s[i] + h * k3[i]));
        for i in 0..6 {
            s[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    [s[0], s[1], s[2]]
}

/// Thomas-Fermi radii (x, y, z) after `t` of free expansion.
pub fn condensate_radii(c: &Condensate, t: f64) -> [f64; 3] {
    let l = scaling_factors(c.trap.axes(), t);
    std::array::from_fn(|i| l[i] * c.tf_radii[i])
}

/// Column density on a regular x-z grid (atoms/m²), row-major in z.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnDensity {
    pub t: f64,
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub density: Vec<f64>,
    /// Vertical position of the cloud centre, ½gt².
    pub center_z: f64,
}

impl ColumnDensity {
    pub fn at(&self, ix: usize, iz: usize) -> f64 {
        self.density[iz * self.x.len() + ix]
    }

    fn cell(&self) -> f64 {
        (self.x[1] - self.x[0]) * (self.z[1] - self.z[0])
    }

    /// Atom number on the grid.
    pub fn total(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.cell()
    }

    /// Ratio of rms extents, vertical over axial, from grid moments.
    pub fn moment_aspect_ratio(&self) -> f64 {
        let (mut w, mut sx, mut sz) = (0.0, 0.0, 0.0);
        for (iz, z) in self.z.iter().enumerate() {
            let dz = z - self.center_z;
            for (ix, x) in self.x.iter().enumerate() {
                let n = self.at(ix, iz);
                w += n;
                sx += n * x * x;
                sz += n * dz * dz;
            }
        }
        (sz / w).sqrt() / (sx / w).sqrt()
    }

    /// Cut along x through the row nearest the centre.
    pub fn cut_x(&self) -> (Vec<f64>, Vec<f64>) {
        let iz = nearest(&self.z, self.center_z);
        (self.x.clone(), (0..self.x.len()).map(|ix| self.at(ix, iz)).collect())
    }

    /// Cut along z through the column nearest x = 0, with z relative to the centre.
    pub fn cut_z(&self) -> (Vec<f64>, Vec<f64>) {
        let ix = nearest(&self.x, 0.0);
        (self.z.iter().map(|z| z - self.center_z).collect(), (0..self.z.len()).map(|iz| self.at(ix, iz)).collect())
    }

    /// CSV with header `x_m,z_m,column_density_m2`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x_m,z_m,column_density_m2\n");
        for (iz, z) in self.z.iter().enumerate() {
            for (ix, x) in self.x.iter().enumerate() {
                out.push_str(&format!("{x:e},{z:e},{:e}\n", self.at(ix, iz)));
            }
        }
        out
    }
}

fn nearest(v: &[f64], target: f64) -> usize {
    let i = v.partition_point(|&a| a < target).min(v.len() - 1);
    if i > 0 && (target - v[i - 1]).abs() < (v[i] - target).abs() {
        i - 1
    } else {
        i
    }
}

/// Column density of the TF parabola: (5N/2πRₓR_z)(1 − x²/Rₓ² − z²/R_z²)^{3/2}.
pub(crate) fn tf_column(n: f64, rx: f64, rz: f64, x: f64, z: f64) -> f64 {
    let u = 1.0 - (x / rx).powi(2) - (z / rz).powi(2);
    if u <= 0.0 {
        0.0
    } else {
        5.0 * n / (2.0 * std::f64::consts::PI * rx * rz) * u.powf(1.5)
    }
}

pub(crate) fn gauss_column(n: f64, sx: f64, sz: f64, x: f64, z: f64) -> f64 {
    n / (2.0 * std::f64::consts::PI * sx * sz) * (-0.5 * ((x / sx).powi(2) + (z / sz).powi(2))).exp()
}

/// Column density `t` after release on a `grid × grid` mesh covering the cloud.
pub fn tof_expand(source: &Source, t: f64, atom: &AtomState, grid: usize) -> Result<ColumnDensity> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::invalid("expansion time must be non-negative"));
    }
    if grid < 8 {
        return Err(Error::invalid("grid needs at least 8 points per axis"));
    }
    let thermal = match source {
        Source::Thermal(c) | Source::Mixed { thermal: c, .. } => Some((c.atom_count, thermal_widths(c, t, atom))),
        Source::Condensate(_) => None,
    };
    let condensate = match source {
        Source::Condensate(c) | Source::Mixed { condensate: c, .. } => Some((c.atom_count, condensate_radii(c, t))),
        Source::Thermal(_) => None,
    };
    let mut half = [0.0f64; 2];
    if let Some((_, s)) = thermal {
        half = [half[0].max(5.0 * s[0]), half[1].max(5.0 * s[2])];
    }
    if let Some((_, r)) = condensate {
        half = [half[0].max(1.05 * r[0]), half[1].max(1.05 * r[2])];
    }
    let center_z = 0.5 * G_STANDARD * t * t;
    let axis = |h: f64, c: f64| -> Vec<f64> {
        (0..grid).map(|i| c - h + (2.0 * h) * (i as f64 + 0.5) / grid as f64).collect()
    };
    let x = axis(half[0], 0.0);
    let z = axis(half[1], center_z);
    let mut density = Vec::with_capacity(grid * grid);
    for zi in &z {
        let dz = zi - center_z;
        for xi in &x {
            let mut n = 0.0;
            if let Some((nt, s)) = thermal {
                n += gauss_column(nt, s[0], s[2], *xi, dz);
            }
            if let Some((nc, r)) = condensate {
                n += tf_column(nc, r[0], r[2], *xi, dz);
            }
            density.push(n);
        }
    }
    Ok(ColumnDensity { t, x, z, density, center_z })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloud::thomas_fermi;
    use crate::traps::TrapFrequencies;

    fn he() -> AtomState {
        AtomState::helium_metastable()
    }

    fn bec() -> Condensate {
        thomas_fermi(2e6, &TrapFrequencies::compressed(), &he()).unwrap()
    }

    fn thermal() -> ThermalCloud {
        ThermalCloud::new(1e6, 2e-6, TrapFrequencies::compressed()).unwrap()
    }

    #[test]
    fn zero_time_matches_trap_anisotropy() {
        let s = Source::Condensate(bec());
        assert!((s.aspect_ratio(0.0, &he()) - 47.0 / 800.0).abs() < 1e-12);
        let th = Source::Thermal(thermal());
        assert!((th.aspect_ratio(0.0, &he()) - 47.0 / 800.0).abs() < 1e-12);
    }

    #[test]
    fn condensate_aspect_inverts() {
        let s = Source::Condensate(bec());
        assert!(s.aspect_ratio(0.0, &he()) < 1.0);
        assert!(s.aspect_ratio(0.03, &he()) > 1.0);
    }

    #[test]
    fn thermal_aspect_goes_to_one() {
        let s = Source::Thermal(thermal());
        assert!((s.aspect_ratio(0.5, &he()) - 1.0).abs() < 0.01);
    }

    #[test]
    fn cigar_radial_scaling_matches_closed_form() {
        // For ε = ω_ax/ω_rad ≪ 1, λ_rad ≈ √(1 + τ²).
        let axes = [2.0 * std::f64::consts::PI * 2.0, 2.0 * std::f64::consts::PI * 800.0, 2.0 * std::f64::consts::PI * 800.0];
        let t = 5e-3;
        let tau = axes[1] * t;
        let l = scaling_factors(axes, t);
        assert!((l[1] / (1.0 + tau * tau).sqrt() - 1.0).abs() < 1e-3, "{l:?}");
    }

    #[test]
    fn grid_conserves_atoms_and_falls() {
        let sources = [
            Source::Thermal(thermal()),
            Source::Condensate(bec()),
            Source::Mixed { condensate: bec(), thermal: thermal() },
        ];
        for s in sources {
            for t in [0.0, 0.005, 0.015] {
                let d = tof_expand(&s, t, &he(), 200).unwrap();
                assert!((d.total() / s.atom_count() - 1.0).abs() < 1e-3, "{s:?} at {t}: {}", d.total());
                assert_eq!(d.center_z, 0.5 * G_STANDARD * t * t);
            }
        }
    }

    #[test]
    fn moment_ratio_tracks_analytic_thermal() {
        let s = Source::Thermal(thermal());
        let d = tof_expand(&s, 0.002, &he(), 200).unwrap();
        assert!((d.moment_aspect_ratio() / s.aspect_ratio(0.002, &he()) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn rejects_negative_time() {
        assert!(tof_expand(&Source::Thermal(thermal()), -1.0, &he(), 50).is_err());
    }
}
