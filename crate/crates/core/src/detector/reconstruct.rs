//! Event reconstruction from delay-line timestamps and momentum recovery.

use serde::{Deserialize, Serialize};

use super::codec::{HitStream, RawHit};
use super::encode::{AnalogHit, DetectorResponse, Timestamps};
use super::geometry::DetectorGeometry;
use crate::error::{Error, Result};
use crate::par;
use crate::physics::{AtomState, G_STANDARD};

/// Per-quadrant constants for turning timestamps into events.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    /// Mean timestamp of an event at t = 0 (s).
    pub time_offset: [f64; 4],
    /// Expected (t_x1 + t_x2) − (t_y1 + t_y2) (s).
    pub sum_difference: f64,
    /// Largest accepted deviation from `sum_difference` (s).
    pub sum_tolerance: f64,
}

impl Calibration {
    /// Calibration implied by the forward model, with a tolerance of
    /// 10σ of the jittered sum difference plus four TDC bins.
    pub fn from_model(geom: &DetectorGeometry, resp: &DetectorResponse) -> Self {
        let v = resp.propagation_speed;
        let [lx, ly] = geom.quadrant_size;
        let time_offset = resp.cable_delay.map(|c| c + (lx + ly) / (4.0 * v));
        let sum_tolerance = 10.0 * 2.0 * resp.channel_jitter() + 4.0 * resp.tdc_bin;
        Self { time_offset, sum_difference: (lx - ly) / v, sum_tolerance }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    /// Detector frame (m).
    pub x: f64,
    pub y: f64,
    /// Impact time relative to the clock origin (s).
    pub t: f64,
    pub quadrant: u8,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Reconstructed {
    Event(EventRecord),
    /// Inside the discarded band along a quadrant edge.
    Discarded { quadrant: u8, local: [f64; 2] },
}

impl Reconstructed {
    pub fn event(&self) -> Option<&EventRecord> {
        match self {
            Reconstructed::Event(e) => Some(e),
            Reconstructed::Discarded { .. } => None,
        }
    }
}

/// Event from four timestamps.
pub fn reconstruct_times(
    quadrant: u8,
    stamps: &Timestamps,
    geom: &DetectorGeometry,
    resp: &DetectorResponse,
    cal: &Calibration,
) -> Result<Reconstructed> {
    let q = quadrant as usize;
    if q > 3 {
        return Err(Error::invalid(format!("quadrant {quadrant} out of range")));
    }
    let [x1, x2, y1, y2] = stamps.offsets;
    let residual = (x1 + x2) - (y1 + y2) - cal.sum_difference;
    if !(residual.abs() <= cal.sum_tolerance) {
        return Err(Error::CorruptHit { quadrant, residual_s: residual, tolerance_s: cal.sum_tolerance });
    }
    let v = resp.propagation_speed;
    let local = [v * (x1 - x2) / 2.0, v * (y1 - y2) / 2.0];
    if geom.in_margin(local) {
        return Ok(Reconstructed::Discarded { quadrant, local });
    }
    let o = geom.quadrant_origins[q];
    let t = stamps.mean() - cal.time_offset[q];
    Ok(Reconstructed::Event(EventRecord { x: o[0] + local[0], y: o[1] + local[1], t, quadrant }))
}

/// Event from a quantized hit; `tdc_bin` in seconds.
pub fn reconstruct_event(
    hit: &RawHit,
    tdc_bin: f64,
    geom: &DetectorGeometry,
    resp: &DetectorResponse,
    cal: &Calibration,
) -> Result<Reconstructed> {
    reconstruct_times(hit.quadrant, &Timestamps::from_ticks(hit.ticks, tdc_bin), geom, resp, cal)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReconReport {
    pub events: Vec<EventRecord>,
    /// Index in the input of every event.
    pub source: Vec<usize>,
    pub discarded: usize,
    pub corrupt: usize,
}

fn collect(outcomes: Vec<Result<Reconstructed>>) -> ReconReport {
    let mut r = ReconReport::default();
    for (i, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok(Reconstructed::Event(e)) => {
                r.events.push(e);
                r.source.push(i);
            }
            Ok(Reconstructed::Discarded { .. }) => r.discarded += 1,
            Err(_) => r.corrupt += 1,
        }
    }
    r
}

/// Reconstructs a stream, counting discarded and corrupt hits.
pub fn reconstruct_stream(stream: &HitStream, geom: &DetectorGeometry, resp: &DetectorResponse, cal: &Calibration) -> ReconReport {
    let bin = stream.tdc_bin();
    collect(par::map_indexed(&stream.hits, |_, h| reconstruct_event(h, bin, geom, resp, cal)))
}

/// Same as [`reconstruct_stream`] for unquantized hits.
pub fn reconstruct_analog(hits: &[AnalogHit], geom: &DetectorGeometry, resp: &DetectorResponse, cal: &Calibration) -> ReconReport {
    collect(par::map_indexed(hits, |_, h| reconstruct_times(h.quadrant, &h.stamps, geom, resp, cal)))
}

/// Momentum in the trap frame (kg·m/s), z pointing down.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentumRecord {
    pub px: f64,
    pub py: f64,
    pub pz: f64,
    /// Experimental run the event belongs to.
    pub shot: u32,
}

impl MomentumRecord {
    pub fn as_array(&self) -> [f64; 3] {
        [self.px, self.py, self.pz]
    }

    pub fn velocity(&self, atom: &AtomState) -> [f64; 3] {
        self.as_array().map(|p| p / atom.mass)
    }
}

/// Initial momentum of an atom released from the trap centre at `release_time`:
/// with τ = t − t_release, v_z = (d − ½gτ²)/τ and v_⊥ = r_⊥/τ rotated into the trap frame.
pub fn reconstruct_momentum(
    ev: &EventRecord,
    geom: &DetectorGeometry,
    release_time: f64,
    atom: &AtomState,
) -> Result<MomentumRecord> {
    let tau = ev.t - release_time;
    if !(tau > 0.0) {
        return Err(Error::invalid(format!("event at {:e} s precedes the release", ev.t)));
    }
    let [x, y] = geom.to_trap(ev.x, ev.y);
    let vz = (geom.drop_distance - 0.5 * G_STANDARD * tau * tau) / tau;
    Ok(MomentumRecord { px: atom.mass * x / tau, py: atom.mass * y / tau, pz: atom.mass * vz, shot: 0 })
}

pub fn events_to_csv(events: &[EventRecord]) -> String {
    let mut out = String::from("quadrant,x_m,y_m,t_s\n");
    for e in events {
        out.push_str(&format!("{},{:e},{:e},{:e}\n", e.quadrant, e.x, e.y, e.t));
    }
    out
}

pub fn momenta_to_csv(m: &[MomentumRecord]) -> String {
    let mut out = String::from("shot,px,py,pz\n");
    for r in m {
        out.push_str(&format!("{},{:e},{:e},{:e}\n", r.shot, r.px, r.py, r.pz));
    }
    out
}

/// Parses the output of [`momenta_to_csv`].
pub fn momenta_from_csv(text: &str) -> Result<Vec<MomentumRecord>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, h)) if h.trim() == "shot,px,py,pz" => {}
        Some((i, _)) => return Err(Error::Csv { line: i + 1, message: "expected header `shot,px,py,pz`".into() }),
        None => return Err(Error::Csv { line: 1, message: "empty file".into() }),
    }
    lines
        .map(|(i, l)| {
            let bad = |message: String| Error::Csv { line: i + 1, message };
            let f: Vec<&str> = l.split(',').map(str::trim).collect();
            if f.len() != 4 {
                return Err(bad(format!("expected 4 fields, found {}", f.len())));
            }
            let shot = f[0].parse().map_err(|e| bad(format!("shot: {e}")))?;
            let p: Vec<f64> = f[1..].iter().map(|s| s.parse::<f64>()).collect::<std::result::Result<_, _>>().map_err(|e| bad(format!("momentum: {e}")))?;
            Ok(MomentumRecord { px: p[0], py: p[1], pz: p[2], shot })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detector::encode::{channel_times, encode_analog};
    use crate::detector::geometry::{simulate_impacts, Impact};
    use crate::ensemble::{Atom, Ensemble};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup() -> (DetectorGeometry, DetectorResponse, Calibration) {
        let g = DetectorGeometry::default();
        let r = DetectorResponse::ideal();
        let c = Calibration::from_model(&g, &r);
        (g, r, c)
    }

    #[test]
    fn symmetric_hit_is_quadrant_centre() {
        let (g, r, c) = setup();
        let times = channel_times(0.3, 3, [0.0, 0.0], &g, &r);
        let e = *reconstruct_times(3, &times, &g, &r, &c).unwrap().event().unwrap();
        assert!((e.x - g.quadrant_origins[3][0]).abs() < 1e-15);
        assert!((e.y - g.quadrant_origins[3][1]).abs() < 1e-15);
        assert!((e.t - 0.3).abs() < 1e-15);
    }

    #[test]
    fn exact_inversion() {
        let (g, r, c) = setup();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let q = rng.random_range(0..4u8);
            let local = [rng.random_range(-0.019..0.019), rng.random_range(-0.021..0.021)];
            let t = rng.random_range(0.3..0.5);
            let e = *reconstruct_times(q, &channel_times(t, q, local, &g, &r), &g, &r, &c).unwrap().event().unwrap();
            let o = g.quadrant_origins[q as usize];
            assert!((e.x - o[0] - local[0]).abs() < 1e-12);
            assert!((e.y - o[1] - local[1]).abs() < 1e-12);
            assert!((e.t - t).abs() < 1e-12);
        }
    }

    #[test]
    fn margin_discards_exactly_the_band() {
        let g = DetectorGeometry { discard_margin: 0.005, ..Default::default() };
        let r = DetectorResponse::ideal();
        let c = Calibration::from_model(&g, &r);
        // 2 mm from the x edge of quadrant 0.
        let local = [g.quadrant_size[0] / 2.0 - 0.002, 0.0];
        let out = reconstruct_times(0, &channel_times(0.4, 0, local, &g, &r), &g, &r, &c).unwrap();
        assert!(matches!(out, Reconstructed::Discarded { quadrant: 0, .. }));
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..500 {
            let local = [rng.random_range(-0.0225..0.0225), rng.random_range(-0.024..0.024)];
            let out = reconstruct_times(1, &channel_times(0.4, 1, local, &g, &r), &g, &r, &c).unwrap();
            assert_eq!(out.event().is_none(), g.in_margin(local));
        }
    }

    #[test]
    fn corrupt_sum_is_rejected() {
        let (g, r, c) = setup();
        let mut t = channel_times(0.4, 0, [0.0, 0.0], &g, &r);
        t.offsets[0] += 1e-6;
        assert!(matches!(reconstruct_times(0, &t, &g, &r, &c), Err(Error::CorruptHit { quadrant: 0, .. })));
    }

    #[test]
    fn momentum_of_atom_at_rest() {
        let g = DetectorGeometry::default();
        let a = AtomState::helium_metastable();
        let t = (2.0 * 0.8 / G_STANDARD).sqrt();
        let m = reconstruct_momentum(&EventRecord { x: 0.0, y: 0.0, t, quadrant: 0 }, &g, 0.0, &a).unwrap();
        assert!(m.as_array().iter().all(|p| p.abs() < 1e-40));
        assert!(reconstruct_momentum(&EventRecord { x: 0.0, y: 0.0, t: 0.0, quadrant: 0 }, &g, 0.0, &a).is_err());
    }

    #[test]
    fn velocity_loop_closure() {
        let g = DetectorGeometry { rotation_about_z: 0.3, ..Default::default() };
        let r = DetectorResponse::ideal();
        let c = Calibration::from_model(&g, &r);
        let a = AtomState::helium_metastable();
        let v = [0.031, -0.017, 0.052];
        let e = Ensemble::from_atoms(vec![Atom::new([0.0; 3], v)]);
        let imp: Vec<Impact> = simulate_impacts(&e, &g).unwrap().impacts;
        let hits = encode_analog(&imp, &g, &r, 0).unwrap().hits;
        let rec = reconstruct_analog(&hits, &g, &r, &c);
        let m = reconstruct_momentum(&rec.events[0], &g, 0.0, &a).unwrap();
        for (got, want) in m.velocity(&a).iter().zip(v) {
            assert!((got / want - 1.0).abs() < 1e-9, "{got} vs {want}");
        }
    }

    #[test]
    fn momentum_csv_round_trip() {
        let m = vec![
            MomentumRecord { px: 1.5e-28, py: -2.0e-29, pz: 3.25e-28, shot: 0 },
            MomentumRecord { px: 0.0, py: 1e-30, pz: -4e-28, shot: 7 },
        ];
        assert_eq!(momenta_from_csv(&momenta_to_csv(&m)).unwrap(), m);
        assert!(momenta_from_csv("shot,px,py,pz\n").unwrap().is_empty());
        assert!(matches!(momenta_from_csv("shot,px,py,pz\n1,2,x,4\n"), Err(Error::Csv { line: 2, .. })));
        assert!(matches!(momenta_from_csv("a,b\n"), Err(Error::Csv { line: 1, .. })));
    }
}
