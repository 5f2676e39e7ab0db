//! Zeeman slower: target field, winding layout, efficiency and deceleration.

pub mod coil;
pub mod decel;
pub mod design;

pub use coil::{fit_layout, fit_layout_on, residual_sum_sq, solenoid_field, FitReport, Layer, Section, WindingConstraints, WindingLayout};
pub use decel::{decelerate, probe_spectrum, DecelOptions, DecelResult, ExitKind, Histogram, Spectrum};
pub use design::{
    decelerating_span, efficiency_at, efficiency_on_grid, efficiency_profile, max_deceleration, resonant_field,
    resonant_velocity, target_field, EfficiencyProfile,
};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::field::FieldProfile;
use crate::physics::{hz_to_angular, AtomState, LaserConfig, Transition};

/// Slower design inputs. Detuning is given in Hz (converted at this boundary).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SlowerParams {
    /// Highest velocity the field is designed to capture (m/s).
    pub v_capture: f64,
    /// m/s
    pub v_final: f64,
    /// Solenoid length (m).
    pub length: f64,
    pub eta_design: f64,
    /// Laser detuning from the unshifted line (Hz).
    pub detuning_hz: f64,
    /// Slowing-beam I/I_s.
    pub saturation: f64,
    pub winding: WindingConstraints,
    /// Samples of the synthesized field profile.
    pub field_samples: usize,
    /// Field region extends this far past each end of the solenoid (m).
    pub field_margin: f64,
}

impl Default for SlowerParams {
    fn default() -> Self {
        Self {
            v_capture: 900.0,
            v_final: 80.0,
            length: 1.36,
            eta_design: 0.7,
            detuning_hz: -370e6,
            saturation: 20.0,
            winding: WindingConstraints::default(),
            field_samples: 6000,
            field_margin: 0.12,
        }
    }
}

impl SlowerParams {
    /// 800 to 80 m/s over 1.36 m, otherwise defaults.
    pub fn capture_800_to_80() -> Self {
        Self { v_capture: 800.0, ..Self::default() }
    }

    pub fn laser(&self, line: Transition) -> Result<LaserConfig> {
        LaserConfig::slowing_beam(line, hz_to_angular(self.detuning_hz), self.saturation)
    }
}

/// A complete design: target, fitted coils and the synthesized field.
#[derive(Clone, Debug)]
pub struct SlowerDesign {
    pub params: SlowerParams,
    pub laser: LaserConfig,
    pub target: FieldProfile,
    pub layout: WindingLayout,
    pub fit: FitReport,
    /// Field of `layout`, sampled over the solenoid plus margins.
    pub synthesized: FieldProfile,
    /// End of the decelerating span (m); the span starts at 0.
    pub span_end: f64,
    /// η of the synthesized field on a fine grid over the span.
    pub efficiency: EfficiencyProfile,
}

impl SlowerDesign {
    pub fn mean_efficiency(&self) -> f64 {
        self.efficiency.mean_over(0.0, self.span_end)
    }

    pub fn max_efficiency(&self) -> f64 {
        self.efficiency.max_over(0.0, self.span_end)
    }

    /// The synthesized field with only the given sections powered.
    pub fn field_with_sections(&self, keep: impl Fn(usize) -> bool) -> Result<FieldProfile> {
        let p = &self.params;
        self.layout.only_sections(keep).field_profile(-p.field_margin, p.length + p.field_margin, p.field_samples)
    }

    /// Plain-text summary.
    pub fn report(&self) -> String {
        let p = &self.params;
        format!(
            "capture velocity      {:.1} m/s\nfinal velocity        {:.1} m/s\nlength                {:.3} m\n\
             decelerating span     {:.4} m\ndesign efficiency     {:.3}\nmean efficiency       {:.4}\n\
             max efficiency        {:.4}\nsections              {}\nlayers per section    {:?}\n\
             turns                 {}\nwire length           {:.1} m\nrms field residual    {:.3} G\n\
             max field residual    {:.3} G\n",
            p.v_capture,
            p.v_final,
            p.length,
            self.span_end,
            p.eta_design,
            self.mean_efficiency(),
            self.max_efficiency(),
            self.layout.sections.len(),
            self.fit.layers_per_section,
            self.fit.total_turns,
            self.fit.total_wire_length,
            self.fit.rms_residual * 1e4,
            self.fit.max_abs_residual * 1e4,
        )
    }
}

/// Target field, layout fit, field synthesis and efficiency in one call.
pub fn design_slower(params: &SlowerParams, line: Transition, atom: &AtomState) -> Result<SlowerDesign> {
    let laser = params.laser(line)?;
    let target = target_field(params.v_capture, params.v_final, params.length, params.eta_design, &laser, atom)?;
    let span_end = decelerating_span(params.v_capture, params.v_final, params.eta_design, &laser, atom);
    let (layout, fit) = if span_end > 0.0 {
        fit_layout_on(&target, &params.winding, 0.0, span_end)?
    } else {
        fit_layout(&target, &params.winding)?
    };
    let synthesized =
        layout.field_profile(-params.field_margin, params.length + params.field_margin, params.field_samples)?;
    let n = 4000;
    let xs: Vec<f64> = (0..n).map(|i| span_end * i as f64 / (n - 1) as f64).collect();
    let efficiency = efficiency_on_grid(&synthesized, &xs, &laser, atom);
    Ok(SlowerDesign { params: *params, laser, target, layout, fit, synthesized, span_end, efficiency })
}
