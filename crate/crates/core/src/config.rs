//! Run configuration, read from TOML.
//!
//! Every key has a default, so an empty file is a complete configuration.
//! Unknown keys are rejected. [`RunConfig::to_toml`] writes the configuration
//! back with all defaults filled in.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::beam::{CollimatorSpec, SourceSpec};
use crate::cloud::{EvapOptions, RfRamp};
use crate::detector::{CorrelationOptions, DetectorGeometry, DetectorResponse};
use crate::error::{Error, Result};
use crate::physics::{hz_to_angular, PhysicsSet};
use crate::slower::{DecelOptions, SlowerParams};
use crate::traps::{IoffeTrapParams, NoiseCorrelation, StageSpec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub master_seed: u64,
    pub output_dir: PathBuf,
    pub physics: PhysicsConfig,
    pub source: SourceConfig,
    pub slower: SlowerConfig,
    pub trap: TrapConfig,
    pub stages: Vec<StageSpec>,
    pub evaporation: EvaporationConfig,
    pub detector: DetectorConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            master_seed: 1,
            output_dir: PathBuf::from("out"),
            physics: PhysicsConfig::default(),
            source: SourceConfig::default(),
            slower: SlowerConfig::default(),
            trap: TrapConfig::default(),
            stages: StageSpec::default_sequence(),
            evaporation: EvaporationConfig::default(),
            detector: DetectorConfig::default(),
        }
    }
}

/// Overrides of the species data.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhysicsConfig {
    /// s-wave scattering length (m).
    pub scattering_length: f64,
    /// Γ/2π of the 1083 nm line (Hz).
    pub linewidth_1083_hz: f64,
}

impl Default for PhysicsConfig {
    fn default() -> Self {
        let p = PhysicsSet::default();
        Self {
            scattering_length: p.atom.scattering_length,
            linewidth_1083_hz: crate::physics::angular_to_hz(p.line_1083.linewidth),
        }
    }
}

impl PhysicsConfig {
    pub fn physics_set(&self) -> Result<PhysicsSet> {
        let base = PhysicsSet::default();
        let atom = base.atom.with_scattering_length(self.scattering_length);
        if !(self.scattering_length > 0.0) {
            return Err(Error::Config("physics.scattering_length must be positive".into()));
        }
        let line_1083 = base.line_1083.with_linewidth(hz_to_angular(self.linewidth_1083_hz), atom.mass)?;
        Ok(PhysicsSet { atom, line_1083, ..base })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SourceConfig {
    pub beam: SourceSpec,
    pub collimator: CollimatorSpec,
    /// Monte-Carlo samples drawn at the source.
    pub samples: usize,
}

impl Default for SourceConfig {
    fn default() -> Self {
        Self { beam: SourceSpec::default(), collimator: CollimatorSpec::default(), samples: 2000 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SlowerConfig {
    pub design: SlowerParams,
    pub simulation: DecelOptions,
    /// Atoms leaving the slower below this speed count as slowed (m/s).
    pub capture_velocity: f64,
}

impl Default for SlowerConfig {
    fn default() -> Self {
        Self { design: SlowerParams::default(), simulation: DecelOptions::default(), capture_velocity: 100.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrapConfig {
    /// Coil parameters of the compressed trap.
    pub coils: IoffeTrapParams,
    /// Frequencies used for evaporation and the condensate (Hz).
    pub radial_hz: f64,
    pub axial_hz: f64,
    /// Fields of the two large opposing coil sets (G) and their relative rms noise.
    pub large_field_1_gauss: f64,
    pub large_field_2_gauss: f64,
    pub relative_noise: f64,
    pub noise_correlation: NoiseCorrelation,
}

impl Default for TrapConfig {
    fn default() -> Self {
        Self {
            coils: IoffeTrapParams::compressed(),
            radial_hz: 800.0,
            axial_hz: 47.0,
            large_field_1_gauss: 160.0,
            large_field_2_gauss: 158.0,
            relative_noise: 1e-4,
            noise_correlation: NoiseCorrelation::Independent,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaporationConfig {
    pub ramp: RfRamp,
    pub eta_cut: f64,
    pub options: EvapOptions,
}

impl Default for EvaporationConfig {
    fn default() -> Self {
        Self { ramp: RfRamp::default(), eta_cut: 6.0, options: EvapOptions::default() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorConfig {
    pub geometry: DetectorGeometry,
    pub response: DetectorResponse,
    pub correlation: CorrelationOptions,
    /// Number of independent drops.
    pub shots: usize,
    /// Released atoms sampled per drop.
    pub samples_per_shot: usize,
    /// Time between releases on the common detector clock (s).
    pub shot_period: f64,
    /// Compute the pair correlation in `run_pipeline`.
    pub correlate: bool,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            // Rotated so the cigar-shaped cloud does not fall along a quadrant gap.
            geometry: DetectorGeometry { rotation_about_z: std::f64::consts::FRAC_PI_4, ..DetectorGeometry::default() },
            response: DetectorResponse::default(),
            correlation: CorrelationOptions::default(),
            shots: 10,
            samples_per_shot: 75_000,
            shot_period: 20.0,
            correlate: true,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let c: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    /// Full configuration with every default materialized.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// [`Self::to_toml`] without `output_dir`, so the text is the same
    /// wherever a run is written. Reading it back restores the default directory.
    pub fn to_portable_toml(&self) -> Result<String> {
        let mut t = toml::Table::try_from(self).map_err(|e| Error::Config(e.to_string()))?;
        t.remove("output_dir");
        toml::to_string(&t).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let check = |r: Result<()>, section: &str| r.map_err(|e| Error::Config(format!("[{section}] {e}")));
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        check(self.physics.physics_set().map(|_| ()), "physics")?;
        check(self.source.beam.validate(), "source.beam")?;
        if self.source.samples == 0 {
            return bad("source.samples must be at least 1");
        }
        if !(self.source.collimator.gain >= 1.0) {
            return bad("source.collimator.gain must be >= 1");
        }
        if !(self.slower.capture_velocity > 0.0) {
            return bad("slower.capture_velocity must be positive");
        }
        if !(self.trap.radial_hz > 0.0 && self.trap.axial_hz > 0.0) {
            return bad("trap frequencies must be positive");
        }
        if !(self.trap.relative_noise >= 0.0) {
            return bad("trap.relative_noise must be non-negative");
        }
        if self.stages.is_empty() {
            return bad("at least one stage is required");
        }
        check(self.evaporation.ramp.validate(), "evaporation.ramp")?;
        if !(3.0..=12.0).contains(&self.evaporation.eta_cut) {
            return bad("evaporation.eta_cut must lie in [3, 12]");
        }
        check(self.detector.geometry.validate(), "detector.geometry")?;
        check(self.detector.response.validate(), "detector.response")?;
        if self.detector.shots == 0 || self.detector.shots > u32::MAX as usize || self.detector.samples_per_shot == 0 {
            return bad("detector.shots and detector.samples_per_shot must be at least 1");
        }
        let fall = crate::detector::fall_time(self.detector.geometry.drop_distance, 0.0);
        if !(self.detector.shot_period > 2.0 * fall) {
            return bad("detector.shot_period must exceed twice the fall time");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_default() {
        assert_eq!(RunConfig::from_toml("").unwrap(), RunConfig::default());
    }

    #[test]
    fn round_trip_materializes_defaults() {
        let c = RunConfig::from_toml("master_seed = 7\n[detector]\nshots = 3\n").unwrap();
        let text = c.to_toml().unwrap();
        assert!(text.contains("samples_per_shot"));
        assert!(text.contains("kind = \"doppler_cooling\""));
        assert_eq!(RunConfig::from_toml(&text).unwrap(), c);
    }

    #[test]
    fn portable_form_drops_only_the_directory() {
        let c = RunConfig { master_seed: 9, output_dir: "elsewhere".into(), ..RunConfig::default() };
        let text = c.to_portable_toml().unwrap();
        assert!(!text.contains("output_dir"));
        assert_eq!(RunConfig::from_toml(&text).unwrap(), RunConfig { output_dir: "out".into(), ..c });
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(matches!(RunConfig::from_toml("seed = 1"), Err(Error::Config(_))));
        assert!(RunConfig::from_toml("[detector.response]\nefficency = 0.5\n").is_err());
        assert!(RunConfig::from_toml("[[stages]]\nkind = \"mot\"\natom_count = 1.0\n").is_err());
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(RunConfig::from_toml("[evaporation]\neta_cut = 20.0\n").is_err());
        assert!(RunConfig::from_toml("[detector.response]\nefficiency = 1.5\n").is_err());
        assert!(RunConfig::from_toml("stages = []\n").is_err());
    }

    #[test]
    fn stage_list_override() {
        let text = "[[stages]]\nkind = \"molasses\"\ntemperature = 1e-3\nduration = 3e-4\n";
        let c = RunConfig::from_toml(text).unwrap();
        assert_eq!(c.stages, vec![StageSpec::Molasses { temperature: 1e-3, duration: 3e-4 }]);
    }
}
