//! Conversational floor detection and adaptive audio spaces.
//!
//! Multi-party audio sessions rarely stay one conversation: floors schism
//! into concurrent sub-conversations and merge back. This crate identifies
//! who is conversing with whom from the pause/overlap timing of utterances,
//! turns the detected floors into per-listener gain mixes, and adapts the
//! channel between push-to-talk and full-duplex from engagement signals. A
//! deterministic simulator generates ground-truth-labeled traces for
//! training and evaluation.
//!
//! All core math is generic over the scalar type via [`scalar::Float`]
//! (`f32` or `f64`); every public type defaults to `f64`.

pub mod eval;
pub mod features;
pub mod floor;
pub mod io;
pub mod mix;
pub mod model;
pub mod scalar;
pub mod sim;
pub mod style;

pub use scalar::Float;

/// Seconds, in the default scalar type.
pub type Seconds = f64;
