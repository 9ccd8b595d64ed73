//! Differentiable numeric primitives used by the hyponetwork.
//!
//! Every forward operation has a hand-written adjoint. All functions are pure
//! and generic over [`Real`](crate::Real) so the gradient checks can run the
//! exact same code path in `f64`.

mod activation;
mod conv;
mod posenc;
mod shuffle;
mod tensor;

pub use activation::{gelu, gelu_backward, gelu_derivative, gelu_inplace};
pub use conv::{conv2d_backward, conv2d_forward, ConvGrads, ConvLayerParams};
pub use posenc::{time_positional_encoding, PE_BASE};
pub use shuffle::{pixel_shuffle, pixel_shuffle_backward, pixel_unshuffle};
pub use tensor::Tensor3;
