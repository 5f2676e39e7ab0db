//! Phase-space samples plus the macroscopic numbers they stand for.

use serde::{Deserialize, Serialize};

use crate::physics::K_B;

/// One phase-space sample. Positions in m, velocities in m/s.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub pos: [f64; 3],
    pub vel: [f64; 3],
}

impl Atom {
    pub fn new(pos: [f64; 3], vel: [f64; 3]) -> Self {
        Self { pos, vel }
    }

    pub fn speed(&self) -> f64 {
        norm(self.vel)
    }
}

/// A set of samples standing for `atom_count` real atoms.
///
/// The samples are a Monte-Carlo representation; `atom_count` and
/// `temperature` carry the physical bookkeeping and may be updated without
/// touching the samples (e.g. by a loss stage).
#[derive(Clone, Debug, PartialEq)]
pub struct Ensemble {
    pub atoms: Vec<Atom>,
    pub atom_count: f64,
    /// K; zero when the ensemble is not thermal (e.g. an atomic beam).
    pub temperature: f64,
    /// Fraction of `atom_count` in the magnetically trappable sublevel.
    pub trappable_fraction: f64,
}

impl Ensemble {
    /// An ensemble whose samples are the atoms themselves.
    pub fn from_atoms(atoms: Vec<Atom>) -> Self {
        let n = atoms.len() as f64;
        Self { atoms, atom_count: n, temperature: 0.0, trappable_fraction: 1.0 }
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn with_atom_count(mut self, n: f64) -> Self {
        self.atom_count = n;
        self
    }

    pub fn with_temperature(mut self, t: f64) -> Self {
        self.temperature = t;
        self
    }

    pub fn mean_velocity(&self) -> [f64; 3] {
        let mut m = [0.0; 3];
        if self.atoms.is_empty() {
            return m;
        }
        for a in &self.atoms {
            for k in 0..3 {
                m[k] += a.vel[k];
            }
        }
        m.map(|c| c / self.atoms.len() as f64)
    }

    /// Per-axis kinetic temperature `m⟨(v − ⟨v⟩)²⟩/k_B`.
    pub fn kinetic_temperature(&self, mass: f64) -> [f64; 3] {
        let n = self.atoms.len();
        if n < 2 {
            return [0.0; 3];
        }
        let mean = self.mean_velocity();
        let mut var = [0.0; 3];
        for a in &self.atoms {
            for k in 0..3 {
                let d = a.vel[k] - mean[k];
                var[k] += d * d;
            }
        }
        var.map(|v| mass * v / (n - 1) as f64 / K_B)
    }

    /// CSV with header `x,y,z,vx,vy,vz` (SI units).
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.atoms.len() + 1));
        out.push_str("x,y,z,vx,vy,vz\n");
        for a in &self.atoms {
            let [x, y, z] = a.pos;
            let [vx, vy, vz] = a.vel;
            out.push_str(&format!("{x:e},{y:e},{z:e},{vx:e},{vy:e},{vz:e}\n"));
        }
        out
    }
}

pub(crate) fn norm(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_has_header_and_rows() {
        let e = Ensemble::from_atoms(vec![Atom::new([0.0; 3], [1.0, 2.0, 3.0]); 3]);
        let csv = e.to_csv();
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.starts_with("x,y,z,vx,vy,vz\n"));
        let row: Vec<f64> = csv.lines().nth(1).unwrap().split(',').map(|s| s.parse().unwrap()).collect();
        assert_eq!(row, vec![0.0, 0.0, 0.0, 1.0, 2.0, 3.0]);
    }

    #[test]
    fn kinetic_temperature_of_two_atoms() {
        let e = Ensemble::from_atoms(vec![
            Atom::new([0.0; 3], [1.0, 0.0, 0.0]),
            Atom::new([0.0; 3], [-1.0, 0.0, 0.0]),
        ]);
        let t = e.kinetic_temperature(K_B);
        assert_eq!(t, [2.0, 0.0, 0.0]);
    }
}
