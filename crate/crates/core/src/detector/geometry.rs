//! Detector placement and free fall from the trap onto the MCP.
//!
//! Trap frame: x axial, y radial, z vertical pointing down, origin at the trap
//! centre. The detector plane sits at z = `drop_distance`; its in-plane frame
//! is the trap frame rotated by `rotation_about_z`.

use serde::{Deserialize, Serialize};

use crate::ensemble::Ensemble;
use crate::error::{Error, Result};
use crate::par;
use crate::physics::G_STANDARD;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorGeometry {
    /// m
    pub drop_distance: f64,
    /// m
    pub mcp_active_diameter: f64,
    /// Quadrant extent along the delay lines (x, y) (m).
    pub quadrant_size: [f64; 2],
    /// m
    pub quadrant_gap: f64,
    /// Band along each quadrant edge whose events are discarded (m).
    pub discard_margin: f64,
    /// Quadrant centres in the detector frame (m).
    pub quadrant_origins: [[f64; 2]; 4],
    /// rad
    pub rotation_about_z: f64,
}

impl Default for DetectorGeometry {
    fn default() -> Self {
        let size = [0.045, 0.048];
        let gap = 0.001;
        let (cx, cy) = ((size[0] + gap) / 2.0, (size[1] + gap) / 2.0);
        Self {
            drop_distance: 0.8,
            mcp_active_diameter: 0.08,
            quadrant_size: size,
            quadrant_gap: gap,
            discard_margin: 0.0025,
            quadrant_origins: [[cx, cy], [-cx, cy], [-cx, -cy], [cx, -cy]],
            rotation_about_z: 0.0,
        }
    }
}

impl DetectorGeometry {
    pub fn validate(&self) -> Result<()> {
        if !(self.drop_distance >= 0.0 && self.mcp_active_diameter > 0.0) {
            return Err(Error::invalid("drop distance must be non-negative and the MCP diameter positive"));
        }
        if !(self.quadrant_size.iter().all(|s| *s > 0.0) && self.quadrant_gap >= 0.0) {
            return Err(Error::invalid("quadrant size must be positive and the gap non-negative"));
        }
        if self.discard_margin < self.quadrant_gap {
            return Err(Error::invalid("discard margin must be at least the quadrant gap"));
        }
        let [sx, sy] = self.quadrant_size;
        for i in 0..4 {
            for j in i + 1..4 {
                let (a, b) = (self.quadrant_origins[i], self.quadrant_origins[j]);
                if (a[0] - b[0]).abs() < sx && (a[1] - b[1]).abs() < sy {
                    return Err(Error::invalid(format!("quadrants {i} and {j} overlap")));
                }
            }
        }
        Ok(())
    }

    /// Trap-frame (x, y) to detector frame.
    pub fn to_detector(&self, x: f64, y: f64) -> [f64; 2] {
        let (s, c) = self.rotation_about_z.sin_cos();
        [c * x + s * y, -s * x + c * y]
    }

    /// Detector-frame (x, y) back to the trap frame.
    pub fn to_trap(&self, x: f64, y: f64) -> [f64; 2] {
        let (s, c) = self.rotation_about_z.sin_cos();
        [c * x - s * y, s * x + c * y]
    }

    /// Quadrant containing a detector-frame point and the local coordinates.
    pub fn locate(&self, x: f64, y: f64) -> Option<(u8, [f64; 2])> {
        let [hx, hy] = self.quadrant_size.map(|s| s / 2.0);
        self.quadrant_origins.iter().enumerate().find_map(|(q, o)| {
            let (lx, ly) = (x - o[0], y - o[1]);
            (lx.abs() <= hx && ly.abs() <= hy).then_some((q as u8, [lx, ly]))
        })
    }

    /// Whether local coordinates fall in the discarded band along the edges.
    pub fn in_margin(&self, local: [f64; 2]) -> bool {
        let [hx, hy] = self.quadrant_size.map(|s| s / 2.0 - self.discard_margin);
        local[0].abs() > hx || local[1].abs() > hy
    }

    pub fn on_mcp(&self, x: f64, y: f64) -> bool {
        x.hypot(y) <= self.mcp_active_diameter / 2.0
    }
}

/// Landing of one atom, in the detector frame.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Impact {
    /// Time since release (s).
    pub t: f64,
    pub x: f64,
    pub y: f64,
    /// Index of the atom in the source ensemble.
    pub atom: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImpactReport {
    /// Sorted by time.
    pub impacts: Vec<Impact>,
    /// Atoms landing outside the active MCP area.
    pub missed: usize,
}

/// Fall time for height `h` ≥ 0 with downward start velocity `vz`:
/// the positive root of h = vz t + ½ g t².
pub fn fall_time(h: f64, vz: f64) -> f64 {
    let root = (vz * vz + 2.0 * G_STANDARD * h).sqrt();
    // Cancellation-free form of (−vz + root)/g.
    if vz >= 0.0 {
        if h == 0.0 {
            0.0
        } else {
            2.0 * h / (vz + root)
        }
    } else {
        (root - vz) / G_STANDARD
    }
}

/// Ballistic flight of every atom to the detector plane.
pub fn simulate_impacts(e: &Ensemble, geom: &DetectorGeometry) -> Result<ImpactReport> {
    geom.validate()?;
    if let Some(i) = e.atoms.iter().position(|a| !(a.pos[2] <= geom.drop_distance)) {
        return Err(Error::invalid(format!("atom {i} starts below the detector plane")));
    }
    let landed = par::map_indexed(&e.atoms, |i, a| {
        let t = fall_time(geom.drop_distance - a.pos[2], a.vel[2]);
        let [x, y] = geom.to_detector(a.pos[0] + a.vel[0] * t, a.pos[1] + a.vel[1] * t);
        geom.on_mcp(x, y).then_some(Impact { t, x, y, atom: i })
    });
    let missed = landed.iter().filter(|l| l.is_none()).count();
    let mut impacts: Vec<Impact> = landed.into_iter().flatten().collect();
    impacts.sort_by(|a, b| a.t.total_cmp(&b.t).then(a.atom.cmp(&b.atom)));
    Ok(ImpactReport { impacts, missed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::Atom;
    use approx::assert_relative_eq;

    fn one(vel: [f64; 3]) -> Ensemble {
        Ensemble::from_atoms(vec![Atom::new([0.0; 3], vel)])
    }

    #[test]
    fn atom_at_rest() {
        let r = simulate_impacts(&one([0.0; 3]), &DetectorGeometry::default()).unwrap();
        let i = r.impacts[0];
        assert_relative_eq!(i.t, (2.0 * 0.8 / G_STANDARD).sqrt(), max_relative = 1e-14);
        assert!((i.t - 0.4039).abs() < 1e-4);
        assert_eq!((i.x, i.y), (0.0, 0.0));
    }

    #[test]
    fn downward_start() {
        let r = simulate_impacts(&one([0.0, 0.0, 1.0]), &DetectorGeometry::default()).unwrap();
        let t = r.impacts[0].t;
        assert!((t + 0.5 * G_STANDARD * t * t - 0.8).abs() < 1e-12);
        assert!((t - 0.3146).abs() < 1e-4);
    }

    #[test]
    fn zero_drop() {
        let g = DetectorGeometry { drop_distance: 0.0, ..Default::default() };
        let r = simulate_impacts(&one([0.01, 0.02, 0.0]), &g).unwrap();
        assert_eq!((r.impacts[0].t, r.impacts[0].x, r.impacts[0].y), (0.0, 0.0, 0.0));
        assert_eq!(fall_time(0.0, -1.0), 2.0 / G_STANDARD);
    }

    #[test]
    fn misses_are_counted() {
        let e = Ensemble::from_atoms(vec![Atom::new([0.0; 3], [1.0, 0.0, 0.0]), Atom::default()]);
        let r = simulate_impacts(&e, &DetectorGeometry::default()).unwrap();
        assert_eq!((r.impacts.len(), r.missed), (1, 1));
    }

    #[test]
    fn rotation_round_trip() {
        let g = DetectorGeometry { rotation_about_z: 0.7, ..Default::default() };
        let [x, y] = g.to_detector(0.01, -0.02);
        let [a, b] = g.to_trap(x, y);
        assert_relative_eq!(a, 0.01, epsilon = 1e-15);
        assert_relative_eq!(b, -0.02, epsilon = 1e-15);
    }

    #[test]
    fn default_layout() {
        let g = DetectorGeometry::default();
        g.validate().unwrap();
        assert_eq!(g.locate(0.0, 0.0), None);
        let (q, l) = g.locate(0.023, 0.0245).unwrap();
        assert_eq!(q, 0);
        assert!(l[0].abs() < 1e-15 && l[1].abs() < 1e-15);
        assert!(g.in_margin([0.021, 0.0]));
        assert!(!g.in_margin([0.019, 0.0]));
        let bad = DetectorGeometry { discard_margin: 0.0, ..g };
        assert!(bad.validate().is_err());
        let overlap = DetectorGeometry { quadrant_origins: [[0.0; 2]; 4], ..g };
        assert!(overlap.validate().is_err());
    }
}
