//! The hyponetwork: configuration, the base / unique / modulated parameter
//! families, and patch-frame synthesis with exact gradients.

mod config;
mod params;
mod synth;

pub use config::{HypoNetConfig, LayerSpec};
pub use params::{expand_unique, modulate, modulate_all, BaseParams, ParamSet, TokenMatrix, UniqueParams};
pub use synth::{
    backprop_modulation, clip_gradients, hyponet_gradients, synthesize_clip, synthesize_frame, HypoGradients,
    LayerGrad,
};
