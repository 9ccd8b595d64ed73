//! Neural weight-stream video codec.
//!
//! A video is split into clips of `N` frames and each clip into patch
//! tubelets. Every tubelet is represented by a small hyponetwork whose
//! convolution weights are shared base parameters modulated by a handful of
//! clip-specific tokens. Only the tokens are transmitted: the first clip in
//! full and later clips as quantized, arithmetic-coded residuals. Decoding runs
//! the hyponetworks forward and fuses the patches back into frames.
//!
//! The tokens are fitted directly by gradient descent per tubelet (see
//! [`encoder`]), with an optional temporal-coherence penalty that trades a
//! little quality for smaller residuals.

pub mod bitstream;
pub mod config;
pub mod encoder;
pub mod error;
pub mod hyponet;
pub mod io;
pub mod kernels;
pub mod metrics;
pub mod pipeline;
pub mod rd;
pub mod synthetic;
pub mod tubelet;
mod real;

pub use error::{Error, Result};
pub use real::Real;
