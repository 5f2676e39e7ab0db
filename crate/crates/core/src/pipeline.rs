//! End-to-end runs, subcommand bodies and figure data.
//!
//! Stage seeds are derived from the master seed as `seed + (k << 40)` with a
//! fixed `k` per stage, so changing one stage's sample count never shifts
//! another stage's random streams.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::beam::{apply_collimation, sample_source, CollimationReport};
use crate::cloud::{
    evaporate, recoil_detuning_curve, scaling_factors, thomas_fermi, tof_expand, Condensate, EvapTrajectory, Source,
    ThermalCloud,
};
use crate::config::{DetectorConfig, RunConfig};
use crate::detector::{
    apply_dead_time, encode_analog, encode_hits, events_to_csv, momenta_from_csv, momenta_to_csv, pair_correlation,
    parse_stream, peak_burst_rate, reconstruct_analog, reconstruct_momentum, reconstruct_stream, serialize_stream,
    simulate_impacts, Calibration, EventRecord, G2Histogram, HitStream, Impact, MomentumRecord,
};
use crate::ensemble::{Atom, Ensemble};
use crate::error::{Error, Result};
use crate::output::{OutputDir, RunManifest};
use crate::physics::{AtomState, PhysicsSet, HBAR, K_B};
use crate::slower::{decelerate, design_slower, DecelResult, ExitKind, Histogram, SlowerDesign, SlowerParams};
use crate::traps::{bias_noise, run_stages, trap_frequencies, trap_report, Ledger, StageReport, TrapFrequencies};

/// Figures with a reproduction.
pub const FIGURES: [u32; 6] = [3, 4, 6, 7, 8, 10];

const SEED_SOURCE: u64 = 1;
const SEED_SLOWER: u64 = 2;
const SEED_STAGES: u64 = 3;
const SEED_RELEASE: u64 = 4;
const SEED_DETECTOR: u64 = 5;
const SEED_CORRELATION: u64 = 6;

fn stage_seed(master: u64, stage: u64) -> u64 {
    master.wrapping_add(stage << 40)
}

/// Burst-rate diagnostic window (s).
const BURST_WINDOW: f64 = 1e-3;

fn physics(cfg: &RunConfig) -> Result<PhysicsSet> {
    cfg.physics.physics_set()
}

fn trap(cfg: &RunConfig) -> TrapFrequencies {
    TrapFrequencies::from_hz(cfg.trap.radial_hz, cfg.trap.axial_hz)
}

pub struct SlowerRun {
    pub design: SlowerDesign,
    pub collimation: CollimationReport,
    /// Collimated beam entering the slower.
    pub initial: Ensemble,
    pub result: DecelResult,
    /// Fraction leaving the slower below the capture velocity.
    pub slowed_fraction: f64,
}

/// Source, collimation, slower design and deceleration.
pub fn run_slower(cfg: &RunConfig) -> Result<SlowerRun> {
    let p = physics(cfg)?;
    let design = design_slower(&cfg.slower.design, p.line_1083, &p.atom).map_err(|e| e.in_stage("slower design"))?;
    let source = sample_source(&cfg.source.beam, cfg.source.samples, stage_seed(cfg.master_seed, SEED_SOURCE))
        .map_err(|e| e.in_stage("beam"))?;
    let (initial, collimation) = apply_collimation(&source, &cfg.source.collimator).map_err(|e| e.in_stage("beam"))?;
    let result = decelerate(
        &initial,
        &design.synthesized,
        &design.laser,
        &p.atom,
        &cfg.slower.simulation,
        stage_seed(cfg.master_seed, SEED_SLOWER),
    )
    .map_err(|e| e.in_stage("slower"))?;
    let slowed = result
        .ensemble
        .atoms
        .iter()
        .zip(&result.exit_kind)
        .filter(|(a, k)| **k == ExitKind::Exited && a.vel[0] < cfg.slower.capture_velocity)
        .count();
    let slowed_fraction = slowed as f64 / result.ensemble.len().max(1) as f64;
    Ok(SlowerRun { design, collimation, initial, result, slowed_fraction })
}

/// Stage ledger from MOT loading to the compressed trap, then evaporation.
/// `input` supplies the samples the MOT stage starts from.
pub fn prepare_cloud(cfg: &RunConfig, input: &Ensemble) -> Result<(Ledger, EvapTrajectory)> {
    let p = physics(cfg)?;
    let (e, mut ledger) =
        run_stages(input, &cfg.stages, &p.atom, stage_seed(cfg.master_seed, SEED_STAGES)).map_err(|e| e.in_stage("stages"))?;
    let cloud = ThermalCloud::new(e.atom_count, e.temperature, trap(cfg)).map_err(|e| e.in_stage("evaporation"))?;
    let ev = &cfg.evaporation;
    let traj = evaporate(&cloud, &ev.ramp, ev.eta_cut, &p.atom, &ev.options).map_err(|e| e.in_stage("evaporation"))?;
    ledger.push(evaporation_report(&traj, ev.ramp.duration, ev.options.lifetime));
    Ok((ledger, traj))
}

fn evaporation_report(traj: &EvapTrajectory, duration: f64, lifetime: f64) -> StageReport {
    let (first, last) = (traj.initial(), traj.last());
    let notes = match traj.bec_crossing {
        Some(t) => format!("PSD {:.3e} -> {:.3e}; condensation at {t:.3} s", first.psd, last.psd),
        None => format!("PSD {:.3e} -> {:.3e}; no condensation", first.psd, last.psd),
    };
    StageReport {
        stage_name: "evaporation".into(),
        atom_count: last.atom_count,
        temperature: last.temperature,
        duration,
        lifetime: Some(lifetime),
        multiplier: last.atom_count / first.atom_count,
        notes,
    }
}

/// Placeholder samples for runs that skip the slower.
fn stage_input(cfg: &RunConfig) -> Ensemble {
    Ensemble::from_atoms(vec![Atom::default(); cfg.source.samples])
}

/// 0.94 ħω̄ N^{1/3} / k_B.
pub fn critical_temperature(atom_count: f64, trap: &TrapFrequencies) -> f64 {
    0.94 * HBAR * trap.mean() * atom_count.cbrt() / K_B
}

pub struct ReleasedCloud {
    /// Samples released from the trap centre.
    pub ensemble: Ensemble,
    pub condensate: Option<Condensate>,
    pub condensate_fraction: f64,
}

/// Asymptotic expansion rates dλᵢ/dt of a released condensate (1/s).
fn expansion_rates(axes: [f64; 3]) -> [f64; 3] {
    let w_min = axes.iter().cloned().fold(f64::INFINITY, f64::min);
    let t = (20.0 / w_min).min(0.2);
    let dt = 1e-3 * t;
    let (a, b) = (scaling_factors(axes, t), scaling_factors(axes, t + dt));
    std::array::from_fn(|i| (b[i] - a[i]) / dt)
}

/// Samples `n` atoms of a released cloud with `atom_count` atoms at
/// `temperature`. The condensed fraction 1 − (T/T_c)³ takes Thomas-Fermi
/// far-field velocities; the rest are Maxwell-Boltzmann. All samples start at
/// the trap centre, the far-field limit of a cloud much smaller than its
/// flight distance. Sample `i` uses the seed `seed + i`.
pub fn release_cloud(
    atom_count: f64,
    temperature: f64,
    trap: &TrapFrequencies,
    atom: &AtomState,
    n: usize,
    seed: u64,
) -> Result<ReleasedCloud> {
    if !(atom_count >= 1.0 && temperature > 0.0) || n == 0 {
        return Err(Error::invalid("release needs at least one atom, one sample and a positive temperature"));
    }
    let tc = critical_temperature(atom_count, trap);
    let fraction = (1.0 - (temperature / tc).powi(3)).max(0.0);
    let condensate = if fraction > 0.0 { Some(thomas_fermi(fraction * atom_count, trap, atom)?) } else { None };
    let v_tf = condensate.map(|c| {
        let rates = expansion_rates(trap.axes());
        std::array::from_fn::<f64, 3, _>(|i| c.tf_radii[i] * rates[i])
    });
    let sv = (K_B * temperature / atom.mass).sqrt();
    let atoms = crate::par::map_range(n, |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
        let vel = match v_tf {
            Some(v) if rng.random::<f64>() < fraction => {
                // Density ∝ 1 − |u|² inside the unit ball.
                let u = loop {
                    let u: [f64; 3] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
                    let r2 = u.iter().map(|x| x * x).sum::<f64>();
                    if r2 < 1.0 && rng.random::<f64>() < 1.0 - r2 {
                        break u;
                    }
                };
                std::array::from_fn(|k| v[k] * u[k])
            }
            _ => {
                let unit = Normal::new(0.0, 1.0).expect("unit normal");
                std::array::from_fn(|_| sv * unit.sample(&mut rng))
            }
        };
        Atom::new([0.0; 3], vel)
    });
    let ensemble = Ensemble { atoms, atom_count, temperature, trappable_fraction: 1.0 };
    Ok(ReleasedCloud { ensemble, condensate, condensate_fraction: fraction })
}

/// Released clouds for every shot.
fn release_shots(cfg: &RunConfig, traj: &EvapTrajectory) -> Result<Vec<ReleasedCloud>> {
    let p = physics(cfg)?;
    let last = traj.last();
    let n = cfg.detector.samples_per_shot;
    (0..cfg.detector.shots)
        .map(|k| {
            let seed = stage_seed(cfg.master_seed, SEED_RELEASE).wrapping_add((k * n) as u64);
            release_cloud(last.atom_count, last.temperature, &trap(cfg), &p.atom, n, seed)
        })
        .collect::<Result<_>>()
        .map_err(|e| e.in_stage("release"))
}

/// Impacts of all shots on one clock: shot `k` is released at `k · shot_period`.
/// `Impact::atom` indexes the concatenated shot ensembles.
pub fn drop_shots(clouds: &[&Ensemble], det: &DetectorConfig) -> Result<(Vec<Impact>, usize)> {
    let mut impacts = Vec::new();
    let (mut offset, mut missed) = (0, 0);
    for (k, e) in clouds.iter().enumerate() {
        let r = simulate_impacts(e, &det.geometry)?;
        missed += r.missed;
        let t0 = k as f64 * det.shot_period;
        for imp in r.impacts {
            if !(imp.t < det.shot_period) {
                return Err(Error::invalid(format!("impact {:.3} s after release overlaps the next shot", imp.t)));
            }
            impacts.push(Impact { t: t0 + imp.t, atom: offset + imp.atom, ..imp });
        }
        offset += e.len();
    }
    Ok((impacts, missed))
}

/// Momenta of events, each assigned to the shot whose release precedes it.
pub fn events_to_momenta(events: &[EventRecord], det: &DetectorConfig, atom: &AtomState) -> Result<Vec<MomentumRecord>> {
    events
        .iter()
        .map(|ev| {
            let shot = (ev.t / det.shot_period).floor().max(0.0);
            let mut m = reconstruct_momentum(ev, &det.geometry, shot * det.shot_period, atom)?;
            m.shot = shot as u32;
            Ok(m)
        })
        .collect()
}

#[derive(Clone, Debug, Default)]
pub struct Detection {
    pub events: Vec<EventRecord>,
    pub momenta: Vec<MomentumRecord>,
    /// m·v of the released sample behind each event; only on the unquantized path.
    pub truth: Option<Vec<[f64; 3]>>,
    /// Stream after dead-time filtering; only when quantizing.
    pub stream: Option<HitStream>,
    pub released: usize,
    pub missed: usize,
    pub in_gap: usize,
    pub undetected: usize,
    pub dead_time_dropped: usize,
    pub discarded: usize,
    pub corrupt: usize,
    pub peak_burst_rate: f64,
}

/// Detector chain for released clouds. With quantization the hits go through
/// the TDC, the dead-time filter and the binary stream; without it the
/// analog timestamps are reconstructed directly and dead time is not applied.
pub fn detect(clouds: &[&Ensemble], det: &DetectorConfig, atom: &AtomState, seed: u64) -> Result<Detection> {
    let (impacts, missed) = drop_shots(clouds, det)?;
    let (geom, resp) = (&det.geometry, &det.response);
    let cal = Calibration::from_model(geom, resp);
    let mut d = Detection { released: clouds.iter().map(|e| e.len()).sum(), missed, ..Default::default() };
    let report = if resp.quantize {
        let enc = encode_hits(&impacts, geom, resp, seed)?;
        let (kept, dead) = apply_dead_time(&enc.stream, resp.dead_time)?;
        d.in_gap = enc.in_gap;
        d.undetected = enc.undetected;
        d.dead_time_dropped = dead.total_dropped();
        d.peak_burst_rate = peak_burst_rate(&kept, BURST_WINDOW);
        let r = reconstruct_stream(&kept, geom, resp, &cal);
        d.stream = Some(kept);
        r
    } else {
        let enc = encode_analog(&impacts, geom, resp, seed)?;
        d.in_gap = enc.in_gap;
        d.undetected = enc.undetected;
        let r = reconstruct_analog(&enc.hits, geom, resp, &cal);
        let flat: Vec<&Atom> = clouds.iter().flat_map(|e| e.atoms.iter()).collect();
        d.truth = Some(
            r.source
                .iter()
                .map(|&h| flat[impacts[enc.hits[h].impact].atom].vel.map(|v| v * atom.mass))
                .collect(),
        );
        r
    };
    d.discarded = report.discarded;
    d.corrupt = report.corrupt;
    d.momenta = events_to_momenta(&report.events, det, atom)?;
    d.events = report.events;
    Ok(d)
}

/// Mean momentum per axis and its standard error.
pub fn momentum_centroid(m: &[MomentumRecord]) -> ([f64; 3], [f64; 3]) {
    let n = m.len() as f64;
    if m.len() < 2 {
        return ([f64::NAN; 3], [f64::NAN; 3]);
    }
    let mean: [f64; 3] = std::array::from_fn(|k| m.iter().map(|r| r.as_array()[k]).sum::<f64>() / n);
    let sem = std::array::from_fn(|k| {
        let var = m.iter().map(|r| (r.as_array()[k] - mean[k]).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    });
    (mean, sem)
}

pub struct PipelineRun {
    pub slower: SlowerRun,
    /// Preparation stages followed by evaporation.
    pub ledger: Ledger,
    pub trajectory: EvapTrajectory,
    pub condensate: Option<Condensate>,
    pub condensate_fraction: f64,
    pub detection: Detection,
    pub g2: Option<G2Histogram>,
    pub warnings: Vec<String>,
}

/// beam → slower → stages → evaporation → drop → detector → reconstruction, in memory.
pub fn simulate(cfg: &RunConfig) -> Result<PipelineRun> {
    cfg.validate()?;
    let p = physics(cfg)?;
    let mut warnings = cfg.source.beam.warnings();
    let slower = run_slower(cfg)?;
    let (ledger, trajectory) = prepare_cloud(cfg, &slower.result.ensemble)?;
    let clouds = release_shots(cfg, &trajectory)?;
    let refs: Vec<&Ensemble> = clouds.iter().map(|c| &c.ensemble).collect();
    let detection = detect(&refs, &cfg.detector, &p.atom, stage_seed(cfg.master_seed, SEED_DETECTOR))
        .map_err(|e| e.in_stage("detector"))?;
    if detection.peak_burst_rate > cfg.detector.response.max_burst_rate {
        warnings.push(format!(
            "peak burst rate {:.3e}/s exceeds the {:.3e}/s read-out limit",
            detection.peak_burst_rate, cfg.detector.response.max_burst_rate
        ));
    }
    let g2 = if cfg.detector.correlate && detection.momenta.len() >= 2 {
        let opts = crate::detector::CorrelationOptions {
            seed: stage_seed(cfg.master_seed, SEED_CORRELATION),
            ..cfg.detector.correlation
        };
        Some(pair_correlation(&detection.momenta, &opts).map_err(|e| e.in_stage("correlation"))?)
    } else {
        None
    };
    Ok(PipelineRun {
        slower,
        ledger,
        trajectory,
        condensate: clouds[0].condensate,
        condensate_fraction: clouds[0].condensate_fraction,
        detection,
        g2,
        warnings,
    })
}

/// Runs the full pipeline and writes its CSVs and `manifest.json` to `cfg.output_dir`.
pub fn run_pipeline(cfg: &RunConfig) -> Result<RunManifest> {
    let run = simulate(cfg)?;
    let mut out = OutputDir::create(&cfg.output_dir)?;
    write_run(&run, cfg, &mut out)
}

pub fn write_run(run: &PipelineRun, cfg: &RunConfig, out: &mut OutputDir) -> Result<RunManifest> {
    let mut m = RunManifest::new("run", cfg)?;
    out.write_str("config.toml", &cfg.to_portable_toml()?)?;
    out.write_str("slower_exit_velocity.csv", &run.slower.result.histogram.to_csv("v_m_s"))?;
    out.write_str("ledger.csv", &run.ledger.to_csv())?;
    out.write_str("evaporation.csv", &run.trajectory.to_csv())?;
    out.write_str("events.csv", &events_to_csv(&run.detection.events))?;
    out.write_str("momenta.csv", &momenta_to_csv(&run.detection.momenta))?;
    if let Some(s) = &run.detection.stream {
        out.write("hits.dld4", &serialize_stream(s)?)?;
    }
    if let Some(g) = &run.g2 {
        out.write_str("g2.csv", &g.to_csv())?;
    }
    m.ledger = run.ledger.entries.clone();
    m.warnings = run.warnings.clone();
    m.set("collimation_gain", run.slower.collimation.gain);
    m.set("slowed_fraction", run.slower.slowed_fraction);
    m.set("final_atom_count", run.trajectory.last().atom_count);
    m.set("final_temperature_k", run.trajectory.last().temperature);
    m.set("psd_gain", run.trajectory.psd_gain());
    m.set("condensate_fraction", run.condensate_fraction);
    detection_summary(&mut m, &run.detection, cfg.detector.shots);
    m.finish(out, "manifest.json")
}

fn detection_summary(m: &mut RunManifest, d: &Detection, shots: usize) {
    m.set("shots", shots as f64);
    m.set("released_samples", d.released as f64);
    m.set("events", d.events.len() as f64);
    m.set("missed_mcp", d.missed as f64);
    m.set("in_gap", d.in_gap as f64);
    m.set("undetected", d.undetected as f64);
    m.set("dead_time_dropped", d.dead_time_dropped as f64);
    m.set("discarded_margin", d.discarded as f64);
    m.set("corrupt", d.corrupt as f64);
    m.set("peak_burst_rate", d.peak_burst_rate);
    let (mean, sem) = momentum_centroid(&d.momenta);
    for (k, axis) in ["x", "y", "z"].iter().enumerate() {
        if mean[k].is_finite() {
            m.set(&format!("momentum_centroid_{axis}"), mean[k]);
            m.set(&format!("momentum_centroid_sem_{axis}"), sem[k]);
        }
    }
}

fn slower_files(out: &mut OutputDir, d: &SlowerDesign) -> Result<()> {
    out.write_str("slower_target_field.csv", &d.target.to_csv())?;
    out.write_str("slower_field.csv", &d.synthesized.to_csv())?;
    out.write_str("slower_layout.csv", &d.layout.to_csv())?;
    out.write_str("slower_efficiency.csv", &efficiency_csv(&d.efficiency))?;
    out.write_str("slower_report.txt", &d.report())?;
    Ok(())
}

fn efficiency_csv(e: &crate::slower::EfficiencyProfile) -> String {
    let mut s = String::from("x_m,eta\n");
    for (x, eta) in e.x.iter().zip(&e.eta) {
        s.push_str(&format!("{x:e},{eta:e}\n"));
    }
    s
}

fn slower_summary(m: &mut RunManifest, d: &SlowerDesign) {
    m.set("span_end_m", d.span_end);
    m.set("mean_efficiency", d.mean_efficiency());
    m.set("max_efficiency", d.max_efficiency());
    m.set("total_turns", d.fit.total_turns as f64);
    m.set("rms_residual_t", d.fit.rms_residual);
}

/// `design-slower`: target field, layout, synthesized field and efficiency.
pub fn cmd_design_slower(cfg: &RunConfig, out: &mut OutputDir) -> Result<RunManifest> {
    let p = physics(cfg)?;
    let d = design_slower(&cfg.slower.design, p.line_1083, &p.atom).map_err(|e| e.in_stage("slower design"))?;
    slower_files(out, &d)?;
    let mut m = RunManifest::new("design-slower", cfg)?;
    slower_summary(&mut m, &d);
    m.finish(out, "manifest-design-slower.json")
}

/// `simulate-slower`: collimated source through the designed slower.
pub fn cmd_simulate_slower(cfg: &RunConfig, out: &mut OutputDir) -> Result<RunManifest> {
    let s = run_slower(cfg)?;
    out.write_str("slower_exit_velocity.csv", &s.result.histogram.to_csv("v_m_s"))?;
    let mut m = RunManifest::new("simulate-slower", cfg)?;
    m.warnings = cfg.source.beam.warnings();
    slower_summary(&mut m, &s.design);
    m.set("collimation_gain", s.collimation.gain);
    m.set("slowed_fraction", s.slowed_fraction);
    m.set("exit_peak_m_s", s.result.histogram.peak());
    m.finish(out, "manifest-simulate-slower.json")
}

/// `trap-analyze`: trap frequencies, bias noise and the stage ledger.
pub fn cmd_trap_analyze(cfg: &RunConfig, out: &mut OutputDir) -> Result<RunManifest> {
    let p = physics(cfg)?;
    let t = &cfg.trap;
    let f = trap_frequencies(&t.coils, &p.atom).map_err(|e| e.in_stage("trap"))?;
    let noise = bias_noise(t.large_field_1_gauss, t.large_field_2_gauss, t.relative_noise, t.noise_correlation)
        .map_err(|e| e.in_stage("trap"))?;
    let (e, ledger) = run_stages(&stage_input(cfg), &cfg.stages, &p.atom, stage_seed(cfg.master_seed, SEED_STAGES))
        .map_err(|e| e.in_stage("stages"))?;
    let mut report = trap_report(&t.coils, &p.atom)?;
    report.push_str(&format!(
        "bias noise       {:.4} mG rms ({:.3} % of {:.3} G)\n",
        noise.abs_noise * 1e3,
        noise.rel_bias_noise * 100.0,
        noise.bias
    ));
    out.write_str("trap_report.txt", &report)?;
    out.write_str("ledger.csv", &ledger.to_csv())?;
    let mut m = RunManifest::new("trap-analyze", cfg)?;
    m.ledger = ledger.entries;
    m.set("radial_hz", f.radial_hz());
    m.set("axial_hz", f.axial_hz());
    m.set("relative_bias_noise", noise.rel_bias_noise);
    m.set("loaded_atom_count", e.atom_count);
    m.set("loaded_temperature_k", e.temperature);
    m.finish(out, "manifest-trap-analyze.json")
}

/// `evaporate`: stage ledger plus the evaporation trajectory.
pub fn cmd_evaporate(cfg: &RunConfig, out: &mut OutputDir) -> Result<RunManifest> {
    let (ledger, traj) = prepare_cloud(cfg, &stage_input(cfg))?;
    out.write_str("evaporation.csv", &traj.to_csv())?;
    out.write_str("ledger.csv", &ledger.to_csv())?;
    let mut m = RunManifest::new("evaporate", cfg)?;
    m.ledger = ledger.entries;
    evaporation_summary(&mut m, &traj);
    m.finish(out, "manifest-evaporate.json")
}

fn evaporation_summary(m: &mut RunManifest, traj: &EvapTrajectory) {
    m.set("psd_gain", traj.psd_gain());
    m.set("loss_fraction", traj.loss_fraction());
    m.set("final_atom_count", traj.last().atom_count);
    m.set("final_temperature_k", traj.last().temperature);
    if let Some(t) = traj.bec_crossing {
        m.set("bec_crossing_s", t);
    }
}

fn impacts_csv(impacts: &[Impact]) -> String {
    let mut s = String::from("t_s,x_m,y_m,atom\n");
    for i in impacts {
        s.push_str(&format!("{:e},{:e},{:e},{}\n", i.t, i.x, i.y, i.atom));
    }
    s
}

/// `simulate-drop`: released clouds falling onto the detector plane.
pub fn cmd_simulate_drop(cfg: &RunConfig, out: &mut OutputDir) -> Result<RunManifest> {
    let (ledger, traj) = prepare_cloud(cfg, &stage_input(cfg))?;
    let clouds = release_shots(cfg, &traj)?;
    let refs: Vec<&Ensemble> = clouds.iter().map(|c| &c.ensemble).collect();
    let (impacts, missed) = drop_shots(&refs, &cfg.detector).map_err(|e| e.in_stage("drop"))?;
    out.write_str("impacts.csv", &impacts_csv(&impacts))?;
    let mut m = RunManifest::new("simulate-drop", cfg)?;
    m.ledger = ledger.entries;
    m.set("condensate_fraction", clouds[0].condensate_fraction);
    m.set("impacts", impacts.len() as f64);
    m.set("missed_mcp", missed as f64);
    m.finish(out, "manifest-simulate-drop.json")
}

/// `encode`: the drop through the quantizing read-out into `hits.dld4`.
pub fn cmd_encode(cfg: &RunConfig, out: &mut OutputDir) -> Result<RunManifest> {
    let p = physics(cfg)?;
    let (ledger, traj) = prepare_cloud(cfg, &stage_input(cfg))?;
    let clouds = release_shots(cfg, &traj)?;
    let refs: Vec<&Ensemble> = clouds.iter().map(|c| &c.ensemble).collect();
    let mut det = cfg.detector;
    det.response.quantize = true;
    let d = detect(&refs, &det, &p.atom, stage_seed(cfg.master_seed, SEED_DETECTOR)).map_err(|e| e.in_stage("detector"))?;
    let stream = d.stream.as_ref().expect("quantized detection keeps its stream");
    out.write("hits.dld4", &serialize_stream(stream)?)?;
    let mut m = RunManifest::new("encode", cfg)?;
    m.ledger = ledger.entries;
    m.set("hits", stream.hits.len() as f64);
    detection_summary(&mut m, &d, cfg.detector.shots);
    if d.peak_burst_rate > det.response.max_burst_rate {
        m.warnings.push(format!("peak burst rate {:.3e}/s exceeds the read-out limit", d.peak_burst_rate));
    }
    m.finish(out, "manifest-encode.json")
}

fn read_stream(input: &Path) -> Result<HitStream> {
    let bytes = std::fs::read(input).map_err(|e| Error::io(input, e))?;
    Ok(parse_stream(&bytes)?)
}

/// `decode`: a `DLD4` file to `hits.csv`.
pub fn cmd_decode(cfg: &RunConfig, input: &Path, out: &mut OutputDir) -> Result<RunManifest> {
    let stream = read_stream(input)?;
    out.write_str("hits.csv", &stream.to_csv())?;
    let mut m = RunManifest::new("decode", cfg)?;
    m.set("hits", stream.hits.len() as f64);
    m.set("tdc_bin_fs", stream.tdc_bin_fs as f64);
    m.finish(out, "manifest-decode.json")
}

/// `reconstruct`: a `DLD4` file to events and momenta. Shots are assigned
/// from the release schedule in the detector configuration.
pub fn cmd_reconstruct(cfg: &RunConfig, input: &Path, out: &mut OutputDir) -> Result<RunManifest> {
    let p = physics(cfg)?;
    let stream = read_stream(input)?;
    let det = &cfg.detector;
    let cal = Calibration::from_model(&det.geometry, &det.response);
    let r = reconstruct_stream(&stream, &det.geometry, &det.response, &cal);
    let momenta = events_to_momenta(&r.events, det, &p.atom)?;
    out.write_str("events.csv", &events_to_csv(&r.events))?;
    out.write_str("momenta.csv", &momenta_to_csv(&momenta))?;
    let mut m = RunManifest::new("reconstruct", cfg)?;
    m.set("hits", stream.hits.len() as f64);
    m.set("events", r.events.len() as f64);
    m.set("discarded_margin", r.discarded as f64);
    m.set("corrupt", r.corrupt as f64);
    m.finish(out, "manifest-reconstruct.json")
}

/// `correlate`: g⁽²⁾ of a momentum CSV.
pub fn cmd_correlate(cfg: &RunConfig, input: &Path, out: &mut OutputDir) -> Result<RunManifest> {
    let text = std::fs::read_to_string(input).map_err(|e| Error::io(input, e))?;
    let momenta = momenta_from_csv(&text)?;
    let opts = crate::detector::CorrelationOptions {
        seed: stage_seed(cfg.master_seed, SEED_CORRELATION),
        ..cfg.detector.correlation
    };
    let g = pair_correlation(&momenta, &opts)?;
    out.write_str("g2.csv", &g.to_csv())?;
    let mut m = RunManifest::new("correlate", cfg)?;
    m.set("events", momenta.len() as f64);
    m.set("pairs", g.pairs as f64);
    m.set("reference_pairs", g.reference_pairs as f64);
    m.finish(out, "manifest-correlate.json")
}

/// `reproduce-figure`: CSV data for one figure.
pub fn reproduce_figure(id: u32, cfg: &RunConfig, out: &mut OutputDir) -> Result<RunManifest> {
    let mut m = RunManifest::new(&format!("reproduce-figure-{id}"), cfg)?;
    match id {
        3 => figure_3(cfg, out, &mut m)?,
        4 => figure_4(cfg, out, &mut m)?,
        6 => figure_6(cfg, out, &mut m)?,
        7 => figure_7(cfg, out, &mut m)?,
        8 => figure_8(cfg, out, &mut m)?,
        10 => figure_10(cfg, out, &mut m)?,
        _ => return Err(Error::invalid(format!("no reproduction for figure {id}; supported: {FIGURES:?}"))),
    }
    m.finish(out, &format!("manifest-figure-{id}.json"))
}

/// Target and synthesized field of the 800 → 80 m/s design, with η(x).
fn figure_3(cfg: &RunConfig, out: &mut OutputDir, m: &mut RunManifest) -> Result<()> {
    let p = physics(cfg)?;
    let params = SlowerParams { v_capture: 800.0, ..cfg.slower.design };
    let d = design_slower(&params, p.line_1083, &p.atom)?;
    let mut s = String::from("x_m,target_field_g,synthesized_field_g\n");
    for &x in d.target.x_samples() {
        s.push_str(&format!("{x:e},{:e},{:e}\n", d.target.value(x) * 1e4, d.synthesized.value(x) * 1e4));
    }
    out.write_str("fig3_field.csv", &s)?;
    out.write_str("fig3_efficiency.csv", &efficiency_csv(&d.efficiency))?;
    slower_summary(m, &d);
    Ok(())
}

/// Longitudinal velocity distribution with the slower off and on.
fn figure_4(cfg: &RunConfig, out: &mut OutputDir, m: &mut RunManifest) -> Result<()> {
    let s = run_slower(cfg)?;
    let bin = cfg.slower.simulation.histogram_bin;
    let off = Histogram::from_values(s.initial.atoms.iter().map(|a| a.vel[0]), 0.0, 1500.0, bin);
    let on = Histogram::from_values(s.result.exit_velocities(), 0.0, 1500.0, bin);
    let mut csv = String::from("v_m_s,counts_slower_off,counts_slower_on\n");
    for ((v, a), b) in off.centers().zip(&off.counts).zip(&on.counts) {
        csv.push_str(&format!("{v:e},{a},{b}\n"));
    }
    out.write_str("fig4_velocity.csv", &csv)?;
    m.set("slowed_fraction", s.slowed_fraction);
    m.set("exit_peak_m_s", on.peak());
    Ok(())
}

/// Evaporation trajectory.
fn figure_6(cfg: &RunConfig, out: &mut OutputDir, m: &mut RunManifest) -> Result<()> {
    let (ledger, traj) = prepare_cloud(cfg, &stage_input(cfg))?;
    out.write_str("fig6_evaporation.csv", &traj.to_csv())?;
    m.ledger = ledger.entries;
    evaporation_summary(m, &traj);
    Ok(())
}

/// Aspect ratio during free expansion: condensate at the end of the ramp,
/// thermal cloud just before condensation; plus a condensate column density.
fn figure_7(cfg: &RunConfig, out: &mut OutputDir, m: &mut RunManifest) -> Result<()> {
    let p = physics(cfg)?;
    let (_, traj) = prepare_cloud(cfg, &stage_input(cfg))?;
    let tr = trap(cfg);
    let bec = Source::Condensate(thomas_fermi(traj.last().atom_count, &tr, &p.atom)?);
    let before = traj.samples.iter().rev().find(|s| s.psd < crate::cloud::BEC_PSD).unwrap_or(traj.initial());
    let thermal = Source::Thermal(ThermalCloud::new(before.atom_count, before.temperature, tr)?);
    let mut csv = String::from("t_s,condensate_aspect,thermal_aspect\n");
    for i in 0..=40 {
        let t = i as f64 * 1e-3;
        csv.push_str(&format!("{t:e},{:e},{:e}\n", bec.aspect_ratio(t, &p.atom), thermal.aspect_ratio(t, &p.atom)));
    }
    out.write_str("fig7_aspect.csv", &csv)?;
    let t_image = 20e-3;
    out.write_str("fig7_column_density.csv", &tof_expand(&bec, t_image, &p.atom, 64)?.to_csv())?;
    m.set("condensate_aspect_40ms", bec.aspect_ratio(40e-3, &p.atom));
    m.set("thermal_aspect_40ms", thermal.aspect_ratio(40e-3, &p.atom));
    Ok(())
}

/// Scattering rate of a resonantly imaged atom at 1083 nm and 389 nm, s = 0.5.
fn figure_8(cfg: &RunConfig, out: &mut OutputDir, m: &mut RunManifest) -> Result<()> {
    let p = physics(cfg)?;
    let a = recoil_detuning_curve(&p.line_1083, 0.5, 100e-6)?;
    let b = recoil_detuning_curve(&p.line_389, 0.5, 100e-6)?;
    out.write_str("fig8_1083nm.csv", &a.to_csv())?;
    out.write_str("fig8_389nm.csv", &b.to_csv())?;
    if let (Some(ta), Some(tb)) = (a.half_time(), b.half_time()) {
        m.set("half_time_1083_s", ta);
        m.set("half_time_389_s", tb);
        m.set("half_time_ratio", ta / tb);
    }
    Ok(())
}

/// Reconstructed momenta of the full pipeline, with per-axis histograms.
fn figure_10(cfg: &RunConfig, out: &mut OutputDir, m: &mut RunManifest) -> Result<()> {
    let cfg = RunConfig { detector: DetectorConfig { correlate: false, ..cfg.detector }, ..cfg.clone() };
    let run = simulate(&cfg)?;
    let mom = &run.detection.momenta;
    out.write_str("fig10_momenta.csv", &momenta_to_csv(mom))?;
    let p_max = mom.iter().flat_map(|r| r.as_array()).fold(0.0, |a: f64, p| a.max(p.abs()));
    let bins = 60;
    let width = if p_max > 0.0 { 2.0 * p_max / bins as f64 } else { 1.0 };
    let hist = |k: usize| Histogram::from_values(mom.iter().map(|r| r.as_array()[k]), -p_max, p_max + 1e-3 * width, width);
    let (hx, hy, hz) = (hist(0), hist(1), hist(2));
    let mut csv = String::from("p_kg_m_s,counts_x,counts_y,counts_z\n");
    for (i, c) in hx.centers().enumerate() {
        csv.push_str(&format!("{c:e},{},{},{}\n", hx.counts[i], hy.counts[i], hz.counts[i]));
    }
    out.write_str("fig10_histogram.csv", &csv)?;
    m.ledger = run.ledger.entries.clone();
    m.warnings = run.warnings.clone();
    detection_summary(m, &run.detection, cfg.detector.shots);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn he() -> AtomState {
        AtomState::helium_metastable()
    }

    #[test]
    fn critical_temperature_scale() {
        let tc = critical_temperature(2e6, &TrapFrequencies::compressed());
        assert!((1.5e-6..2.0e-6).contains(&tc), "{tc}");
    }

    #[test]
    fn cold_release_is_condensed() {
        let tr = TrapFrequencies::compressed();
        let r = release_cloud(2e6, 1e-8, &tr, &he(), 2000, 3).unwrap();
        assert!(r.condensate_fraction > 0.999);
        // Cigar: the released condensate expands fastest radially.
        let rms = |k: usize| (r.ensemble.atoms.iter().map(|a| a.vel[k].powi(2)).sum::<f64>() / 2000.0).sqrt();
        assert!(rms(2) > 5.0 * rms(0));
        assert!(r.ensemble.atoms.iter().all(|a| a.pos == [0.0; 3]));
    }

    #[test]
    fn hot_release_is_thermal() {
        let r = release_cloud(2e6, 1e-5, &TrapFrequencies::compressed(), &he(), 4000, 3).unwrap();
        assert_eq!(r.condensate_fraction, 0.0);
        assert!(r.condensate.is_none());
        let t = r.ensemble.kinetic_temperature(he().mass);
        assert!(t.iter().all(|t| (t / 1e-5 - 1.0).abs() < 0.1), "{t:?}");
    }

    #[test]
    fn release_is_seeded() {
        let tr = TrapFrequencies::compressed();
        let a = release_cloud(2e6, 5e-7, &tr, &he(), 100, 9).unwrap();
        let b = release_cloud(2e6, 5e-7, &tr, &he(), 100, 9).unwrap();
        assert_eq!(a.ensemble, b.ensemble);
    }

    #[test]
    fn shots_share_one_clock() {
        let det = DetectorConfig::default();
        let e = Ensemble::from_atoms(vec![Atom::default(); 3]);
        let (imp, missed) = drop_shots(&[&e, &e], &det).unwrap();
        assert_eq!((imp.len(), missed), (6, 0));
        assert!((imp[3].t - imp[0].t - det.shot_period).abs() < 1e-9);
        assert_eq!(imp[5].atom, 5);
    }

    #[test]
    fn ideal_detection_closes_the_loop() {
        let mut det = DetectorConfig::default();
        det.response = crate::detector::DetectorResponse::ideal();
        let a = he();
        let e = release_cloud(2e6, 2e-7, &TrapFrequencies::compressed(), &a, 3000, 1).unwrap().ensemble;
        let d = detect(&[&e, &e], &det, &a, 0).unwrap();
        let truth = d.truth.as_ref().unwrap();
        assert_eq!(d.events.len() + d.discarded + d.in_gap + d.missed, 6000);
        for (m, t) in d.momenta.iter().zip(truth) {
            for k in 0..3 {
                assert!((m.as_array()[k] - t[k]).abs() <= 1e-9 * t[k].abs().max(1e-30), "{m:?} {t:?}");
            }
        }
        assert!(d.momenta.iter().any(|m| m.shot == 1));
    }

    #[test]
    fn unknown_figure_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutputDir::create(dir.path()).unwrap();
        assert!(reproduce_figure(5, &RunConfig::default(), &mut out).is_err());
    }
}
