use std::f64::consts::PI;

use super::Tensor3;
use crate::error::{Error, Result};
use crate::Real;

/// Frequency base of the sinusoidal time encoding.
pub const PE_BASE: f64 = 1.25;

/// Sinusoidal encoding of a frame position within its clip, as a
/// `(dim, 1, 1)` tensor.
///
/// With `t = frame_index / clip_len`, entries come in `(sin, cos)` pairs:
/// `[sin(b^0 pi t), cos(b^0 pi t), sin(b^1 pi t), ...]`.
pub fn time_positional_encoding<F: Real>(frame_index: usize, clip_len: usize, dim: usize) -> Result<Tensor3<F>> {
    if dim == 0 || dim % 2 != 0 {
        return Err(Error::Config(format!("positional encoding dim must be even and > 0, got {dim}")));
    }
    if frame_index >= clip_len {
        return Err(Error::Config(format!(
            "frame index {frame_index} outside clip of length {clip_len}"
        )));
    }
    let t = frame_index as f64 / clip_len as f64;
    let mut data = Vec::with_capacity(dim);
    for i in 0..dim / 2 {
        let arg = PE_BASE.powi(i as i32) * PI * t;
        data.push(F::lit(arg.sin()));
        data.push(F::lit(arg.cos()));
    }
    Tensor3::from_vec(dim, 1, 1, data)
}
