//! Tapered-solenoid winding layouts and their on-axis field.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::FieldProfile;
use crate::par;
use crate::physics::MU_0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    /// Upstream edge of the first turn (m).
    pub x_start: f64,
    pub n_turns: u32,
    /// m
    pub radius: f64,
    /// Axial spacing between turns (m).
    pub wire_pitch: f64,
    pub current_sign: i8,
}

impl Layer {
    pub fn x_end(&self) -> f64 {
        self.x_start + self.n_turns as f64 * self.wire_pitch
    }

    fn turn_position(&self, i: u32) -> f64 {
        self.x_start + (i as f64 + 0.5) * self.wire_pitch
    }

    pub fn wire_length(&self) -> f64 {
        self.n_turns as f64 * std::f64::consts::TAU * self.radius
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Section {
    /// Upstream edge of the innermost layer (m).
    pub x_start: f64,
    /// Ordered from the tube outwards.
    pub layers: Vec<Layer>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindingLayout {
    pub sections: Vec<Section>,
    /// A
    pub current: f64,
    /// m²
    pub wire_cross_section: f64,
}

impl WindingLayout {
    pub fn empty(current: f64, wire_cross_section: f64) -> Self {
        Self { sections: Vec::new(), current, wire_cross_section }
    }

    pub fn layers(&self) -> impl Iterator<Item = &Layer> {
        self.sections.iter().flat_map(|s| s.layers.iter())
    }

    pub fn total_turns(&self) -> u64 {
        self.layers().map(|l| l.n_turns as u64).sum()
    }

    /// m
    pub fn total_wire_length(&self) -> f64 {
        self.layers().map(Layer::wire_length).sum()
    }

    pub fn with_current(mut self, current: f64) -> Self {
        self.current = current;
        self
    }

    /// Keeps only the sections whose index satisfies `keep`.
    pub fn only_sections(&self, keep: impl Fn(usize) -> bool) -> Self {
        let sections = self.sections.iter().enumerate().filter(|(i, _)| keep(*i)).map(|(_, s)| s.clone()).collect();
        Self { sections, ..self.clone() }
    }

    /// On-axis (B, dB/dx) at `x`.
    pub fn field_and_derivative(&self, x: f64) -> (f64, f64) {
        let mut b = 0.0;
        let mut db = 0.0;
        for layer in self.layers() {
            let r2 = layer.radius * layer.radius;
            let pref = layer.current_sign as f64 * MU_0 * self.current * r2 / 2.0;
            let (mut lb, mut ldb) = (0.0, 0.0);
            for i in 0..layer.n_turns {
                let d = x - layer.turn_position(i);
                let q = r2 + d * d;
                let inv = 1.0 / (q * q.sqrt());
                lb += inv;
                ldb += -3.0 * d * inv / q;
            }
            b += pref * lb;
            db += pref * ldb;
        }
        (b, db)
    }

    /// Samples the synthesized field on `n` uniform points with analytic
    /// derivatives.
    pub fn field_profile(&self, x0: f64, x1: f64, n: usize) -> Result<FieldProfile> {
        if n < 2 || !(x1 > x0) {
            return Err(Error::invalid("field sampling needs n >= 2 and x1 > x0"));
        }
        let xs: Vec<f64> = (0..n).map(|i| x0 + (x1 - x0) * i as f64 / (n - 1) as f64).collect();
        let vals = par::map_indexed(&xs, |_, &x| self.field_and_derivative(x));
        let (b, db) = vals.into_iter().unzip();
        FieldProfile::with_derivatives(xs, b, db)
    }

    /// One row per layer.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("section,layer,x_start_m,x_end_m,n_turns,radius_m,wire_pitch_m,current_sign\n");
        for (si, s) in self.sections.iter().enumerate() {
            for (li, l) in s.layers.iter().enumerate() {
                out.push_str(&format!(
                    "{si},{li},{:e},{:e},{},{:e},{:e},{}\n",
                    l.x_start,
                    l.x_end(),
                    l.n_turns,
                    l.radius,
                    l.wire_pitch,
                    l.current_sign
                ));
            }
        }
        out
    }
}

/// On-axis field of `layout` at `x`: the sum of the circular-loop closed form
/// `μ₀ I R² / (2 (R² + d²)^{3/2})` over every turn.
pub fn solenoid_field(layout: &WindingLayout, x: f64) -> f64 {
    layout.field_and_derivative(x).0
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WindingConstraints {
    /// Outer radius of the vacuum tube (m).
    pub tube_radius: f64,
    /// Axial wire size, i.e. the turn pitch (m).
    pub wire_axial: f64,
    /// Radial wire size, i.e. the layer thickness (m).
    pub wire_radial: f64,
    /// Maximum layers per section.
    pub max_layers: usize,
    /// A
    pub current: f64,
    /// Windings may start this far upstream of the target (m).
    pub upstream_overhang: f64,
    /// Windings may end this far downstream of the target (m).
    pub downstream_overhang: f64,
}

impl Default for WindingConstraints {
    fn default() -> Self {
        Self { tube_radius: 0.017, wire_axial: 2.5e-3, wire_radial: 1.1e-3, max_layers: 40, current: 2.0, upstream_overhang: 0.04, downstream_overhang: 0.04 }
    }
}

impl WindingConstraints {
    fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InfeasibleLayout(what.to_string()));
        if self.max_layers == 0 {
            return bad("max_layers must be at least 1");
        }
        if !(self.tube_radius > 0.0) {
            return bad("tube_radius must be positive");
        }
        if !(self.wire_axial > 0.0) || !(self.wire_radial > 0.0) {
            return bad("wire dimensions must be positive");
        }
        if !(self.current > 0.0) {
            return bad("current must be positive");
        }
        if !(self.upstream_overhang >= 0.0) || !(self.downstream_overhang >= 0.0) {
            return bad("overhangs must be non-negative");
        }
        Ok(())
    }

    /// Field step contributed by one long layer, `μ₀ I / pitch`.
    pub fn layer_field(&self) -> f64 {
        MU_0 * self.current / self.wire_axial
    }

    fn radius(&self, layer: usize) -> f64 {
        self.tube_radius + (layer as f64 + 0.5) * self.wire_radial
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FitReport {
    /// Points on which the residual is evaluated (m).
    pub eval_x: Vec<f64>,
    /// Σ (B_layout − B_target)² (T²)
    pub residual_sum_sq: f64,
    /// T
    pub rms_residual: f64,
    /// T
    pub max_abs_residual: f64,
    pub layers_per_section: Vec<usize>,
    pub total_turns: u64,
    /// m
    pub total_wire_length: f64,
    pub sweeps: usize,
}

/// Σ (B_layout − B_target)² over `xs`, by direct summation.
pub fn residual_sum_sq(layout: &WindingLayout, target: &FieldProfile, xs: &[f64]) -> f64 {
    par::map_indexed(xs, |_, &x| {
        let r = solenoid_field(layout, x) - target.value(x);
        r * r
    })
    .into_iter()
    .sum()
}

/// Turn slots `[s, e)` of one layer during the fit.
#[derive(Clone, Copy, Debug)]
struct Span {
    s: usize,
    e: usize,
}

impl Span {
    fn is_empty(&self) -> bool {
        self.s == self.e
    }
}

struct SectionState {
    sign: f64,
    lo: usize,
    hi: usize,
    layers: Vec<Span>,
}

/// Integer layer layout minimising the L2 field residual on the target grid.
///
/// Turns sit on a fixed axial grid of pitch `wire_axial`. Each section covers
/// one sign run of the target and carries up to `max_layers` nested layers
/// (an outer layer never extends past the layer beneath it). A greedy
/// level-crossing initialisation is refined by coordinate descent over
/// single-turn moves of either end of each layer until no move lowers the
/// residual, so the result is locally optimal under such moves.
pub fn fit_layout(target: &FieldProfile, c: &WindingConstraints) -> Result<(WindingLayout, FitReport)> {
    fit_layout_on(target, c, target.x_min(), target.x_max())
}

/// As [`fit_layout`], with the residual restricted to `[x0, x1]` and the
/// windings to `[x0 − upstream_overhang, x1 + downstream_overhang]`.
pub fn fit_layout_on(target: &FieldProfile, c: &WindingConstraints, x0: f64, x1: f64) -> Result<(WindingLayout, FitReport)> {
    c.validate()?;
    if !(x1 > x0) {
        return Err(Error::invalid("fit range must be increasing"));
    }
    let wire_area = c.wire_axial * c.wire_radial;
    let p = c.wire_axial;
    let x_lo = x0 - c.upstream_overhang;
    let n_slots = ((x1 + c.downstream_overhang - x_lo) / p + 1e-9).floor() as usize;
    let slot_x = |t: usize| x_lo + (t as f64 + 0.5) * p;

    let j0 = ((x0 - x_lo) / p - 1e-9).ceil() as usize;
    let j1 = ((x1 - x_lo) / p + 1e-9).floor() as usize;
    let eval_x: Vec<f64> = (j0..=j1).map(|j| x_lo + j as f64 * p).collect();
    let goal: Vec<f64> = eval_x.iter().map(|&x| target.value(x)).collect();

    let step = c.layer_field();
    let peak = goal.iter().fold(0.0f64, |m, b| m.max(b.abs()));
    if peak < 0.5 * step || n_slots == 0 {
        let layout = WindingLayout::empty(c.current, wire_area);
        let ss: f64 = goal.iter().map(|g| g * g).sum();
        let report = FitReport {
            rms_residual: (ss / eval_x.len().max(1) as f64).sqrt(),
            max_abs_residual: goal.iter().fold(0.0, |m, g| m.max(g.abs())),
            eval_x,
            residual_sum_sq: ss,
            layers_per_section: vec![],
            total_turns: 0,
            total_wire_length: 0.0,
            sweeps: 0,
        };
        return Ok((layout, report));
    }
    if peak > c.max_layers as f64 * step {
        return Err(Error::InfeasibleLayout(format!(
            "max_layers: target peak {:.1} G exceeds {} layers x {:.2} G",
            peak * 1e4,
            c.max_layers,
            step * 1e4
        )));
    }

    // Cumulative loop kernels per layer radius. Evaluation point j sits at
    // x_lo + j p, turn t at x_lo + (t + 1/2) p, so the coupling depends on
    // d = j − t only.
    let d_min = j0 as i64 - n_slots as i64 + 1;
    let d_max = j1 as i64;
    let kernels: Vec<Vec<f64>> = (0..c.max_layers)
        .map(|l| {
            let r = c.radius(l);
            let r2 = r * r;
            let pref = MU_0 * c.current * r2 / 2.0;
            let mut cum = Vec::with_capacity((d_max - d_min + 2) as usize);
            cum.push(0.0);
            let mut acc = 0.0;
            for d in d_min..=d_max {
                let dist = (d as f64 - 0.5) * p;
                let q = r2 + dist * dist;
                acc += pref / (q * q.sqrt());
                cum.push(acc);
            }
            cum
        })
        .collect();
    // Single-turn coupling K_l(d) and the layer sum C(j − s) − C(j − e).
    let single = |l: usize, d: i64| {
        let i = (d - d_min + 1) as usize;
        kernels[l][i] - kernels[l][i - 1]
    };
    let cum = |l: usize, m: i64| kernels[l][(m - d_min + 1) as usize];

    // Sign runs of the target become sections.
    let mut sections: Vec<SectionState> = Vec::new();
    {
        let sign_at = |t: usize| {
            let b = target.value(slot_x(t));
            if b.abs() < 0.5 * step {
                0.0
            } else {
                b.signum()
            }
        };
        let mut cur: Option<(f64, usize)> = None;
        let mut last_nonzero = 0;
        for t in 0..n_slots {
            let s = sign_at(t);
            if s == 0.0 {
                continue;
            }
            match cur {
                Some((cs, start)) if cs != s => {
                    let boundary = (last_nonzero + 1 + t) / 2;
                    sections.push(SectionState { sign: cs, lo: start, hi: boundary, layers: vec![] });
                    cur = Some((s, boundary));
                }
                None => cur = Some((s, 0)),
                _ => {}
            }
            last_nonzero = t;
        }
        if let Some((cs, start)) = cur {
            sections.push(SectionState { sign: cs, lo: start, hi: n_slots, layers: vec![] });
        }
    }

    // Greedy start: layer l covers the slots where the target magnitude
    // exceeds (l + 1/2) layer steps.
    for sec in &mut sections {
        for l in 0..c.max_layers {
            let level = (l as f64 + 0.5) * step;
            let covered: Vec<usize> =
                (sec.lo..sec.hi).filter(|&t| sec.sign * target.value(slot_x(t)) >= level).collect();
            let span = match (covered.first(), covered.last()) {
                (Some(&a), Some(&b)) => Span { s: a, e: b + 1 },
                _ => {
                    let at = sec.layers.last().map_or(sec.lo, |sp| sp.s);
                    Span { s: at, e: at }
                }
            };
            let span = match sec.layers.last() {
                Some(inner) if inner.is_empty() => Span { s: inner.s, e: inner.s },
                Some(inner) if !span.is_empty() => {
                    let s = span.s.max(inner.s);
                    Span { s, e: span.e.min(inner.e).max(s) }
                }
                _ => span,
            };
            sec.layers.push(span);
        }
    }

    let mut field = vec![0.0; eval_x.len()];
    for sec in &sections {
        for (l, sp) in sec.layers.iter().enumerate() {
            for (jj, f) in field.iter_mut().enumerate() {
                let j = (j0 + jj) as i64;
                *f += sec.sign * (cum(l, j - sp.s as i64) - cum(l, j - sp.e as i64));
            }
        }
    }
    let mut resid: Vec<f64> = field.iter().zip(&goal).map(|(f, g)| f - g).collect();

    let valid = |sec: &SectionState, l: usize, sp: Span| -> bool {
        if sp.s > sp.e || sp.s < sec.lo || sp.e > sec.hi {
            return false;
        }
        if !sp.is_empty() && l > 0 {
            let inner = sec.layers[l - 1];
            if inner.is_empty() || sp.s < inner.s || sp.e > inner.e {
                return false;
            }
        }
        if let Some(outer) = sec.layers.get(l + 1) {
            if !outer.is_empty() && (sp.is_empty() || outer.s < sp.s || outer.e > sp.e) {
                return false;
            }
        }
        true
    };

    let mut sweeps = 0;
    let tiny = 1e-30;
    loop {
        sweeps += 1;
        let mut improved = false;
        for si in 0..sections.len() {
            for l in 0..c.max_layers {
                loop {
                    let sp = sections[si].layers[l];
                    let mut best: Option<(f64, Span, usize, f64)> = None;
                    let candidates = [
                        (sp.s.checked_sub(1).map(|s| Span { s, e: sp.e }), sp.s.wrapping_sub(1), 1.0),
                        (Some(Span { s: sp.s + 1, e: sp.e }), sp.s, -1.0),
                        (Some(Span { s: sp.s, e: sp.e + 1 }), sp.e, 1.0),
                        (sp.e.checked_sub(1).map(|e| Span { s: sp.s, e }), sp.e.wrapping_sub(1), -1.0),
                    ];
                    for (cand, slot, dir) in candidates {
                        let Some(cand) = cand else { continue };
                        if sp.is_empty() && dir < 0.0 {
                            continue;
                        }
                        if !valid(&sections[si], l, cand) {
                            continue;
                        }
                        let amp = dir * sections[si].sign;
                        let mut delta = 0.0;
                        for (jj, r) in resid.iter().enumerate() {
                            let k = amp * single(l, (j0 + jj) as i64 - slot as i64);
                            delta += k * (2.0 * r + k);
                        }
                        if delta < -tiny && best.is_none_or(|b| delta < b.0) {
                            best = Some((delta, cand, slot, amp));
                        }
                    }
                    let Some((_, cand, slot, amp)) = best else { break };
                    for (jj, r) in resid.iter_mut().enumerate() {
                        *r += amp * single(l, (j0 + jj) as i64 - slot as i64);
                    }
                    sections[si].layers[l] = cand;
                    improved = true;
                }
            }
        }
        if !improved || sweeps > 100_000 {
            break;
        }
    }

    let layout = WindingLayout {
        sections: sections
            .iter()
            .filter_map(|sec| {
                let layers: Vec<Layer> = sec
                    .layers
                    .iter()
                    .enumerate()
                    .filter(|(_, sp)| !sp.is_empty())
                    .map(|(l, sp)| Layer {
                        x_start: x_lo + sp.s as f64 * p,
                        n_turns: (sp.e - sp.s) as u32,
                        radius: c.radius(l),
                        wire_pitch: p,
                        current_sign: sec.sign as i8,
                    })
                    .collect();
                (!layers.is_empty()).then(|| Section { x_start: layers[0].x_start, layers })
            })
            .collect(),
        current: c.current,
        wire_cross_section: wire_area,
    };
    let ss = residual_sum_sq(&layout, target, &eval_x);
    let max_abs = eval_x.iter().fold(0.0f64, |m, &x| m.max((solenoid_field(&layout, x) - target.value(x)).abs()));
    let report = FitReport {
        rms_residual: (ss / eval_x.len() as f64).sqrt(),
        max_abs_residual: max_abs,
        residual_sum_sq: ss,
        layers_per_section: layout.sections.iter().map(|s| s.layers.len()).collect(),
        total_turns: layout.total_turns(),
        total_wire_length: layout.total_wire_length(),
        eval_x,
        sweeps,
    };
    Ok((layout, report))
}
