//! Forward model of the delay-line read-out: impacts to timestamps.
//!
//! A hit at quadrant-local (x, y) at time t produces
//! t_x1 = t + c_q + (L_x/2 + x)/v_p and t_x2 = t + c_q + (L_x/2 − x)/v_p
//! (y likewise), with c_q the quadrant's cable delay. Jitter has two parts:
//! independent per-channel noise σ_ch = √2 σ_xy / v_p, which sets the spatial
//! precision σ_xy, and a common-mode term shared by all four channels that
//! brings the precision of the mean timestamp up to σ_t.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::codec::{HitStream, RawHit, MAX_TICKS};
use super::geometry::{DetectorGeometry, Impact};
use crate::error::{Error, Result};
use crate::par;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorResponse {
    /// Effective signal speed along the delay lines (m/s).
    pub propagation_speed: f64,
    /// s
    pub tdc_bin: f64,
    /// Target rms position error per axis (m); 0 disables channel jitter.
    pub spatial_jitter_rms: f64,
    /// Target rms error of the mean timestamp (s).
    pub temporal_jitter_rms: f64,
    /// Per quadrant (s).
    pub dead_time: f64,
    pub efficiency: f64,
    /// Burst rate above which a warning is raised (1/s).
    pub max_burst_rate: f64,
    /// Round timestamps to TDC ticks.
    pub quantize: bool,
    /// Fixed delay of each quadrant's read-out chain (s).
    pub cable_delay: [f64; 4],
}

impl Default for DetectorResponse {
    fn default() -> Self {
        Self {
            propagation_speed: 1e6,
            tdc_bin: 6.8e-12,
            spatial_jitter_rms: 177e-6,
            temporal_jitter_rms: 220e-12,
            dead_time: 25e-9,
            efficiency: 0.07,
            max_burst_rate: 3e6,
            quantize: true,
            cable_delay: [1.0e-6, 1.0008e-6, 1.0016e-6, 1.0024e-6],
        }
    }
}

impl DetectorResponse {
    /// Response with perfect efficiency, no jitter and no quantization.
    pub fn ideal() -> Self {
        Self { spatial_jitter_rms: 0.0, temporal_jitter_rms: 0.0, efficiency: 1.0, quantize: false, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.propagation_speed > 0.0 && self.tdc_bin > 0.0) {
            return Err(Error::invalid("propagation speed and TDC bin must be positive"));
        }
        if !(self.spatial_jitter_rms >= 0.0 && self.temporal_jitter_rms >= 0.0 && self.dead_time >= 0.0) {
            return Err(Error::invalid("jitter and dead time must be non-negative"));
        }
        if !(0.0..=1.0).contains(&self.efficiency) {
            return Err(Error::invalid("efficiency must lie in [0, 1]"));
        }
        if self.cable_delay.iter().any(|c| !(*c >= 0.0)) {
            return Err(Error::invalid("cable delays must be non-negative"));
        }
        Ok(())
    }

    /// Independent per-channel timing noise (s).
    pub fn channel_jitter(&self) -> f64 {
        std::f64::consts::SQRT_2 * self.spatial_jitter_rms / self.propagation_speed
    }

    /// Common-mode timing noise (s); zero if the channel noise alone exceeds the target.
    pub fn common_jitter(&self) -> f64 {
        let c = self.channel_jitter();
        (self.temporal_jitter_rms.powi(2) - c * c / 4.0).max(0.0).sqrt()
    }

    /// TDC bin in femtoseconds, as stored in the stream header.
    pub fn tdc_bin_fs(&self) -> u64 {
        (self.tdc_bin * 1e15).round() as u64
    }
}

/// Four timestamps t_x1, t_x2, t_y1, t_y2 (s), stored as a common epoch plus
/// small offsets so that differences keep full precision.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timestamps {
    pub epoch: f64,
    pub offsets: [f64; 4],
}

impl Timestamps {
    pub fn from_ticks(ticks: [u64; 4], tdc_bin: f64) -> Self {
        let base = ticks[0];
        Self {
            epoch: base as f64 * tdc_bin,
            offsets: ticks.map(|t| (t as i128 - base as i128) as f64 * tdc_bin),
        }
    }

    pub fn absolute(&self) -> [f64; 4] {
        self.offsets.map(|o| self.epoch + o)
    }

    pub fn mean(&self) -> f64 {
        self.epoch + self.offsets.iter().sum::<f64>() / 4.0
    }
}

/// Timestamps before quantization.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalogHit {
    pub quadrant: u8,
    pub stamps: Timestamps,
    /// Index into the impact list.
    pub impact: usize,
}

/// Noise-free timestamps for a quadrant-local position.
pub fn channel_times(t: f64, quadrant: u8, local: [f64; 2], geom: &DetectorGeometry, resp: &DetectorResponse) -> Timestamps {
    let c = resp.cable_delay[quadrant as usize];
    let v = resp.propagation_speed;
    let [lx, ly] = geom.quadrant_size;
    Timestamps {
        epoch: t,
        offsets: [
            c + (lx / 2.0 + local[0]) / v,
            c + (lx / 2.0 - local[0]) / v,
            c + (ly / 2.0 + local[1]) / v,
            c + (ly / 2.0 - local[1]) / v,
        ],
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalogEncoding {
    /// Ordered by mean timestamp.
    pub hits: Vec<AnalogHit>,
    /// Impacts that fell between quadrants.
    pub in_gap: usize,
    /// Impacts removed by the detection efficiency.
    pub undetected: usize,
}

/// Thinning, quadrant assignment and jittered timestamps. Impact `i` draws
/// from an RNG seeded with `seed + i`.
pub fn encode_analog(impacts: &[Impact], geom: &DetectorGeometry, resp: &DetectorResponse, seed: u64) -> Result<AnalogEncoding> {
    geom.validate()?;
    resp.validate()?;
    if impacts.windows(2).any(|w| w[1].t < w[0].t) {
        return Err(Error::invalid("impacts must be sorted by time"));
    }
    let (sc, sm) = (resp.channel_jitter(), resp.common_jitter());
    enum Fate {
        Undetected,
        Gap,
        Hit(AnalogHit),
    }
    let fates = par::map_indexed(impacts, |i, imp| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
        if resp.efficiency < 1.0 && rng.random::<f64>() >= resp.efficiency {
            return Fate::Undetected;
        }
        let Some((q, local)) = geom.locate(imp.x, imp.y) else {
            return Fate::Gap;
        };
        let mut stamps = channel_times(imp.t, q, local, geom, resp);
        let unit = Normal::new(0.0, 1.0).expect("unit normal");
        if sm > 0.0 {
            let common = sm * unit.sample(&mut rng);
            stamps.offsets.iter_mut().for_each(|t| *t += common);
        }
        if sc > 0.0 {
            stamps.offsets.iter_mut().for_each(|t| *t += sc * unit.sample(&mut rng));
        }
        Fate::Hit(AnalogHit { quadrant: q, stamps, impact: i })
    });
    let mut out = AnalogEncoding { hits: Vec::new(), in_gap: 0, undetected: 0 };
    for f in fates {
        match f {
            Fate::Undetected => out.undetected += 1,
            Fate::Gap => out.in_gap += 1,
            Fate::Hit(h) => out.hits.push(h),
        }
    }
    out.hits.sort_by(|a, b| a.stamps.mean().total_cmp(&b.stamps.mean()).then(a.impact.cmp(&b.impact)));
    Ok(out)
}

/// A quantized stream with the impact index of every hit.
#[derive(Clone, Debug, PartialEq)]
pub struct EncodedHits {
    pub stream: HitStream,
    pub impact: Vec<usize>,
    pub in_gap: usize,
    pub undetected: usize,
}

/// Rounds analog hits to TDC ticks and orders them by tick sum.
pub fn quantize(hits: &[AnalogHit], resp: &DetectorResponse) -> Result<(HitStream, Vec<usize>)> {
    let bin_fs = resp.tdc_bin_fs();
    if bin_fs == 0 {
        return Err(Error::invalid("TDC bin rounds to zero femtoseconds"));
    }
    let bin = bin_fs as f64 * 1e-15;
    let mut raw = Vec::with_capacity(hits.len());
    for h in hits {
        let mut ticks = [0u64; 4];
        for (k, t) in h.stamps.absolute().iter().enumerate() {
            let n = (t / bin).round();
            if !(0.0..=MAX_TICKS as f64).contains(&n) {
                return Err(Error::invalid(format!("timestamp {t:e} s outside the TDC range")));
            }
            ticks[k] = n as u64;
        }
        raw.push((RawHit { quadrant: h.quadrant, ticks }, h.impact));
    }
    raw.sort_by_key(|(r, i)| (r.tick_sum(), *i));
    let (hits, idx) = raw.into_iter().unzip();
    Ok((HitStream::new(bin_fs, hits), idx))
}

/// Full encoding to a DLD4 hit stream.
pub fn encode_hits(impacts: &[Impact], geom: &DetectorGeometry, resp: &DetectorResponse, seed: u64) -> Result<EncodedHits> {
    let a = encode_analog(impacts, geom, resp, seed)?;
    let (stream, impact) = quantize(&a.hits, resp)?;
    Ok(EncodedHits { stream, impact, in_gap: a.in_gap, undetected: a.undetected })
}
