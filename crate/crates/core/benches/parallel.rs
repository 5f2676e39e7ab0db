//! Hot kernels on the rayon pool against a single thread.
//!
//! `cargo bench -p hebec` measures the default pool and a one-thread pool;
//! `cargo bench -p hebec --no-default-features` adds the sequential build
//! under the same benchmark names for comparison.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hebec::config::DetectorConfig;
use hebec::detector::{
    encode_hits, pair_correlation, reconstruct_stream, Calibration, CorrelationOptions, DetectorGeometry,
    DetectorResponse, Impact,
};
use hebec::ensemble::{Atom, Ensemble};
use hebec::physics::PhysicsSet;
use hebec::pipeline::{events_to_momenta, release_cloud};
use hebec::slower::{decelerate, design_slower, DecelOptions, SlowerParams};
use hebec::traps::TrapFrequencies;

/// Runs `f` in every execution mode this build supports.
fn modes(c: &mut Criterion, group: &str, f: impl Fn() + Sync) {
    let mut g = c.benchmark_group(group);
    g.sample_size(10);
    #[cfg(feature = "parallel")]
    {
        let n = rayon::current_num_threads();
        g.bench_function(BenchmarkId::new("rayon_pool", n), |b| b.iter(&f));
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        g.bench_function(BenchmarkId::new("rayon_single", 1), |b| b.iter(|| one.install(&f)));
    }
    #[cfg(not(feature = "parallel"))]
    g.bench_function(BenchmarkId::new("sequential", 1), |b| b.iter(&f));
    g.finish();
}

fn slower(c: &mut Criterion) {
    let p = PhysicsSet::default();
    let params = SlowerParams::default();
    let d = design_slower(&params, p.line_1083, &p.atom).unwrap();
    let laser = params.laser(p.line_1083).unwrap();
    let atoms = (0..1000).map(|i| Atom::new([0.0; 3], [600.0 + 0.3 * i as f64, 0.0, 0.0])).collect();
    let beam = Ensemble::from_atoms(atoms);
    modes(c, "decelerate_1k", || {
        black_box(decelerate(&beam, &d.synthesized, &laser, &p.atom, &DecelOptions::default(), 1).unwrap());
    });
}

fn release(c: &mut Criterion) {
    let p = PhysicsSet::default();
    let trap = TrapFrequencies::from_hz(800.0, 47.0);
    modes(c, "release_100k", || {
        black_box(release_cloud(2e6, 100e-9, &trap, &p.atom, 100_000, 4).unwrap());
    });
}

fn detector(c: &mut Criterion) {
    let geom = DetectorGeometry::default();
    let resp = DetectorResponse { efficiency: 1.0, ..DetectorResponse::default() };
    let cal = Calibration::from_model(&geom, &resp);
    let impacts: Vec<Impact> = (0..100_000)
        .map(|i| {
            let a = i as f64 * 0.618_034;
            let r = 0.035 * ((i % 997) as f64 / 997.0).sqrt();
            Impact { t: 0.4 + i as f64 * 1e-7, x: r * a.cos(), y: r * a.sin(), atom: i }
        })
        .collect();
    modes(c, "encode_reconstruct_100k", || {
        let enc = encode_hits(&impacts, &geom, &resp, 5).unwrap();
        black_box(reconstruct_stream(&enc.stream, &geom, &resp, &cal));
    });
}

fn correlation(c: &mut Criterion) {
    let det = DetectorConfig::default();
    let p = PhysicsSet::default();
    let trap = TrapFrequencies::from_hz(800.0, 47.0);
    let cloud = release_cloud(2e6, 100e-9, &trap, &p.atom, 20_000, 6).unwrap();
    let events: Vec<_> = hebec::detector::simulate_impacts(&cloud.ensemble, &det.geometry)
        .unwrap()
        .impacts
        .iter()
        .map(|i| hebec::detector::EventRecord { x: i.x, y: i.y, t: i.t, quadrant: 0 })
        .collect();
    let momenta = events_to_momenta(&events, &det, &p.atom).unwrap();
    let opts = CorrelationOptions::default();
    modes(c, "pair_correlation_20k", || {
        black_box(pair_correlation(&momenta, &opts).unwrap());
    });
}

criterion_group!(benches, slower, release, detector, correlation);
criterion_main!(benches);
