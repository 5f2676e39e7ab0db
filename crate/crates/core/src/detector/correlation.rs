//! Second-order correlation g⁽²⁾(Δp) of detected momenta.
//!
//! Pairs from the same shot are histogrammed against a reference built from
//! pairs that cannot be correlated: pairs from different shots when the data
//! contain several shots, otherwise pairs from copies whose momentum
//! components have been shuffled independently along each axis.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::reconstruct::MomentumRecord;
use crate::error::{Error, Result};
use crate::par;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairAxis {
    X,
    Y,
    Z,
    #[default]
    Magnitude,
}

impl PairAxis {
    fn separation(self, a: &[f64; 3], b: &[f64; 3]) -> f64 {
        match self {
            PairAxis::X => (a[0] - b[0]).abs(),
            PairAxis::Y => (a[1] - b[1]).abs(),
            PairAxis::Z => (a[2] - b[2]).abs(),
            PairAxis::Magnitude => ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorrelationOptions {
    /// Bin width (kg·m/s).
    pub bin: f64,
    pub bins: usize,
    pub axis: PairAxis,
    /// Shuffled copies for single-shot data.
    pub shuffle_rounds: usize,
    pub seed: u64,
}

impl Default for CorrelationOptions {
    fn default() -> Self {
        Self { bin: 1e-29, bins: 50, axis: PairAxis::Magnitude, shuffle_rounds: 4, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct G2Histogram {
    pub centers: Vec<f64>,
    pub pair_counts: Vec<u64>,
    pub reference_counts: Vec<u64>,
    pub g2: Vec<f64>,
    /// Poisson error on g2; NaN where the reference bin is empty.
    pub error: Vec<f64>,
    pub pairs: u64,
    pub reference_pairs: u64,
}

impl G2Histogram {
    /// CSV with header `dp,g2,error,pairs,reference`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("dp,g2,error,pairs,reference\n");
        for i in 0..self.centers.len() {
            out.push_str(&format!(
                "{:e},{:e},{:e},{},{}\n",
                self.centers[i], self.g2[i], self.error[i], self.pair_counts[i], self.reference_counts[i]
            ));
        }
        out
    }

    /// Bin with the largest g2 among bins holding at least `min_pairs` pairs.
    pub fn peak(&self, min_pairs: u64) -> Option<usize> {
        (0..self.g2.len())
            .filter(|&i| self.pair_counts[i] >= min_pairs && self.g2[i].is_finite())
            .max_by(|&a, &b| self.g2[a].total_cmp(&self.g2[b]))
    }
}

struct Counts {
    hist: Vec<u64>,
    pairs: u64,
}

fn merge(mut a: Counts, b: Counts) -> Counts {
    for (x, y) in a.hist.iter_mut().zip(b.hist) {
        *x += y;
    }
    a.pairs += b.pairs;
    a
}

/// All pairs (i, j), i < j, accepted by `keep`.
fn count_pairs(p: &[[f64; 3]], keep: impl Fn(usize, usize) -> bool + Sync + Send, o: &CorrelationOptions) -> Counts {
    let n = p.len();
    par::fold_chunks(
        n,
        64,
        || Counts { hist: vec![0; o.bins], pairs: 0 },
        |acc, i| {
            for j in i + 1..n {
                if !keep(i, j) {
                    continue;
                }
                acc.pairs += 1;
                let k = (o.axis.separation(&p[i], &p[j]) / o.bin) as usize;
                if k < o.bins {
                    acc.hist[k] += 1;
                }
            }
        },
        merge,
    )
}

pub fn pair_correlation(events: &[MomentumRecord], opts: &CorrelationOptions) -> Result<G2Histogram> {
    if events.len() < 2 {
        return Err(Error::invalid("pair correlation needs at least two events"));
    }
    if !(opts.bin > 0.0) || opts.bins == 0 {
        return Err(Error::invalid("histogram needs a positive bin width and at least one bin"));
    }
    let p: Vec<[f64; 3]> = events.iter().map(|e| e.as_array()).collect();
    let shot: Vec<u32> = events.iter().map(|e| e.shot).collect();
    let multi_shot = shot.iter().any(|s| *s != shot[0]);
    let same = count_pairs(&p, |i, j| shot[i] == shot[j], opts);
    let reference = if multi_shot {
        count_pairs(&p, |i, j| shot[i] != shot[j], opts)
    } else {
        if opts.shuffle_rounds == 0 {
            return Err(Error::invalid("single-shot data need at least one shuffle round"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let mut total = Counts { hist: vec![0; opts.bins], pairs: 0 };
        for _ in 0..opts.shuffle_rounds {
            let mut cols: [Vec<f64>; 3] = std::array::from_fn(|k| p.iter().map(|v| v[k]).collect());
            for c in &mut cols {
                c.shuffle(&mut rng);
            }
            let q: Vec<[f64; 3]> = (0..p.len()).map(|i| [cols[0][i], cols[1][i], cols[2][i]]).collect();
            total = merge(total, count_pairs(&q, |_, _| true, opts));
        }
        total
    };
    if same.pairs == 0 {
        return Err(Error::invalid("no same-shot pairs"));
    }
    let (ns, nr) = (same.pairs as f64, reference.pairs as f64);
    let mut g2 = Vec::with_capacity(opts.bins);
    let mut error = Vec::with_capacity(opts.bins);
    for k in 0..opts.bins {
        let (s, r) = (same.hist[k] as f64, reference.hist[k] as f64);
        if r == 0.0 {
            g2.push(f64::NAN);
            error.push(f64::NAN);
            continue;
        }
        let g = (s / ns) / (r / nr);
        g2.push(g);
        // A bin with no pairs still carries the one-count Poisson scale.
        error.push((s.max(1.0) / ns) / (r / nr) * (1.0 / s.max(1.0) + 1.0 / r).sqrt());
    }
    Ok(G2Histogram {
        centers: (0..opts.bins).map(|k| (k as f64 + 0.5) * opts.bin).collect(),
        pair_counts: same.hist,
        reference_counts: reference.hist,
        g2,
        error,
        pairs: same.pairs,
        reference_pairs: reference.pairs,
    })
}
