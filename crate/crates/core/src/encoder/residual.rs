use crate::bitstream::{encode_stream, ResidualMode, ResidualStream};
use crate::error::Result;
use crate::hyponet::UniqueParams;

/// Unquantized residual stream of a fitted sequence; decodes bitwise to the
/// input in every mode.
pub fn compute_residual_stream(
    sequence: &[UniqueParams<f32>],
    mode: ResidualMode,
    keyframe_interval: Option<u32>,
    position: u32,
) -> Result<ResidualStream> {
    encode_stream(sequence, mode, None, keyframe_interval, position).map(|(s, _)| s)
}
