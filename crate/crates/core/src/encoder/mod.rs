//! Fitting of base and unique parameters.
//!
//! Unique tokens are optimized directly per tubelet with Adam on the
//! reconstruction error, then finetuned jointly across the clips of one
//! position with an L1 penalty on consecutive clips' weights.

mod adam;
mod coherence;
mod fit;
mod pretrain;
mod residual;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use coherence::{sequence_delta_l1, sequence_objective, temporal_l1, RegTarget, SequenceGradients};
pub use fit::{
    finetune_with_coherence, finish_sequence, fit_sequence_independent, fit_sequence_with_coherence, fit_unique,
    EncoderConfig, FitResult,
};
pub use pretrain::{pretrain_base, PretrainConfig, PretrainResult};
pub use residual::compute_residual_stream;
