//! Energy-efficient distributed adaptive estimation over networks of agents
//! that observe coarsely quantized (1-12 bit) signals.
//!
//! The crate simulates adapt-then-combine diffusion LMS across a connected
//! agent graph where every agent digitizes its regressor and desired signal
//! with low-resolution ADCs. The quantization-aware variant (DQA-LMS) models
//! each quantizer through its Bussgang decomposition and applies a scalar
//! bias correction to the LMS recursion so the network still converges in
//! the mean to the unknown parameter vector.
//!
//! # Modules
//!
//! - [`quantkit`] -- Lloyd-Max scalar quantizer design for Gaussian sources,
//!   complex-signal quantization, Bussgang gains, distortion quantities
//! - [`netgraph`] -- agent topologies, Metropolis combination weights,
//!   validation, and the lifted network operator `A (x) I_M`
//! - [`diffusion`] -- per-agent DLMS / DQA-LMS adaptation, online variance
//!   tracking, the bias-correction coefficient, and the combine step
//! - [`analysis`] -- step-size stability bounds, the mean weight-error
//!   recursion, steady-state MSD approximation, ADC power and per-iteration
//!   complexity accounting
//! - [`simkit`] -- scenario generation, seeded signal streams, and the
//!   ensemble Monte-Carlo experiment harness producing MSD learning curves
//!
//! All randomness is derived from per-(trial, node, stream) ChaCha
//! substreams of a single scenario seed, so results are bit-identical
//! regardless of how many worker threads run the trials.

// Dense matrix arithmetic reads clearest with explicit indices.
#![allow(clippy::needless_range_loop)]

pub mod analysis;
pub mod diffusion;
pub mod error;
pub mod netgraph;
pub mod quantkit;
pub mod simkit;

pub use error::{Error, Result};

/// Library version string, read from `Cargo.toml` at compile time.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
