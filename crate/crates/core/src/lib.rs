//! Numerical toolkit for a metastable-helium BEC apparatus.
//!
//! The crate follows the atoms from source to detector:
//!
//! * [`physics`]: constants, species data, optical transitions, laser beams.
//! * [`beam`]: source ensembles and transverse collimation.
//! * [`slower`]: Zeeman-slower target field, winding layout, efficiency
//!   profile and Monte-Carlo deceleration.
//! * [`traps`]: Ioffe-Pritchard frequencies, bias-field noise and the stage
//!   ledger from MOT to the compressed magnetic trap.
//! * [`cloud`]: phase-space density, evaporation, Thomas-Fermi condensates,
//!   time-of-flight expansion and bimodal fitting.
//! * [`detector`]: four-quadrant delay-line detector simulation, the `DLD4`
//!   binary hit-stream codec, reconstruction and pair correlations.
//! * [`pipeline`]: configuration, end-to-end runs and figure data.
//!
//! Parallel loops go through [`par`], which uses rayon when the `parallel`
//! feature is enabled and plain iterators otherwise. Every stochastic routine
//! derives per-item RNG seeds from a master seed, so both builds produce
//! bit-identical output.

pub mod beam;
pub mod cloud;
pub mod config;
pub mod detector;
pub mod ensemble;
pub mod error;
pub mod field;
pub mod output;
pub mod par;
pub mod physics;
pub mod pipeline;
pub mod slower;
pub mod traps;

pub use ensemble::{Atom, Ensemble};
pub use error::{Error, Result};
