//! Non-neural core of harmonic gated speech enhancement.
//!
//! The crate computes everything in the harmonic gating path that does not
//! need trained weights:
//!
//! * [`stft`]: analysis/synthesis transform and power compression.
//! * [`harmonic`]: the 0.1 Hz resolution harmonic integral matrix, candidate
//!   significances, per-frame pitch and harmonic-location rasters.
//! * [`sed`]: corpus energy statistics, threshold labels and the
//!   activity/voicing frame decisions.
//! * [`gate`]: the harmonic gate built from those factors.
//! * [`masking`]: complex mask application and additive magnitude compensation.
//! * [`compensator`]: forward pass of gated compensation blocks with
//!   deterministic weights.
//! * [`metrics`]: SI-SDR scoring of enhanced audio.
//! * [`pipeline`]: the file-level `stats`, `analyze` and `oracle` runs.
//!
//! Runnable walkthroughs of each capability live in the crate's `examples/`.

pub mod audio_io;
pub mod compensator;
pub mod error;
pub mod gate;
pub mod harmonic;
pub mod masking;
pub mod metrics;
pub mod pipeline;
pub mod sed;
pub mod stft;
pub mod synth;

pub use error::{Error, Result};

#[cfg(test)]
mod property_tests;
