//! Per-quadrant dead time and burst-rate diagnostics.

use serde::{Deserialize, Serialize};

use super::codec::HitStream;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeadTimeReport {
    pub kept: usize,
    pub dropped: [usize; 4],
}

impl DeadTimeReport {
    pub fn total_dropped(&self) -> usize {
        self.dropped.iter().sum()
    }
}

/// Drops every hit whose mean timestamp is less than `dead_time` after the
/// previously accepted hit of the same quadrant. Quadrants do not interact.
pub fn apply_dead_time(stream: &HitStream, dead_time: f64) -> Result<(HitStream, DeadTimeReport)> {
    if !(dead_time >= 0.0) {
        return Err(Error::invalid("dead time must be non-negative"));
    }
    // Compare tick sums (4 × mean) to stay in integers where possible.
    let window = 4.0 * dead_time / stream.tdc_bin();
    let mut last_seen: [Option<u128>; 4] = [None; 4];
    let mut last_kept: [Option<u128>; 4] = [None; 4];
    let mut report = DeadTimeReport::default();
    let mut hits = Vec::with_capacity(stream.hits.len());
    for (index, h) in stream.hits.iter().enumerate() {
        let q = h.quadrant as usize;
        if q > 3 {
            return Err(Error::invalid(format!("hit {index} has quadrant {q}")));
        }
        let s = h.tick_sum();
        if last_seen[q].is_some_and(|p| s < p) {
            return Err(Error::UnorderedStream { quadrant: h.quadrant, index });
        }
        last_seen[q] = Some(s);
        match last_kept[q] {
            Some(p) if ((s - p) as f64) < window => report.dropped[q] += 1,
            _ => {
                last_kept[q] = Some(s);
                hits.push(*h);
            }
        }
    }
    report.kept = hits.len();
    Ok((HitStream::new(stream.tdc_bin_fs, hits), report))
}

/// Highest event rate over any window of length `window` (1/s), by mean timestamp.
pub fn peak_burst_rate(stream: &HitStream, window: f64) -> f64 {
    if stream.hits.is_empty() || !(window > 0.0) {
        return 0.0;
    }
    let bin = stream.tdc_bin();
    let mut t: Vec<f64> = stream.hits.iter().map(|h| h.tick_sum() as f64 * bin / 4.0).collect();
    t.sort_by(f64::total_cmp);
    let (mut lo, mut best) = (0, 0);
    for hi in 0..t.len() {
        while t[hi] - t[lo] >= window {
            lo += 1;
        }
        best = best.max(hi - lo + 1);
    }
    best as f64 / window
}
