//! Wheel-rail adhesion condition estimation from rolling-noise audio.
//!
//! The crate covers the whole offline workflow: decode recordings, cut fixed
//! length segments, summarize each segment as a 26-value feature vector,
//! standardize, train a softmax MLP to recognise `dry_40 / dry_60 / wet_40 /
//! wet_60`, and score it on clean and noise-augmented audio. A synthetic corpus
//! generator stands in for rig recordings.

pub mod audio_io;
pub mod dataset;
pub mod dsp;
pub mod error;
pub mod eval;
pub mod features;
pub mod mlp;
pub mod synth;

pub use error::{Error, Result};
