//! Weight quantization, residual streams, entropy coding, and file formats.

mod arith;
mod basefile;
mod bytes;
mod container;
mod quant;
mod stream;

pub use arith::{arithmetic_decode, arithmetic_encode, laplace_histogram, FrequencyTable, MAX_TOTAL};
pub use basefile::{base_fingerprint, read_base, write_base, BASE_MAGIC, BASE_VERSION};
pub use container::{
    bpp_from_bits, compute_bpp, header_len, read_container, read_container_with_layout, write_container,
    write_container_with_layout, CodedContainer, ContainerHeader, ContainerLayout, GridParams, CONTAINER_MAGIC,
    CONTAINER_VERSION, CONV_PADDING_ZERO, FRAME_PADDING_REPEAT_LAST,
};
pub use quant::{check_bits, dequantize, quantize, QuantizedTensor, MAX_BITS, MIN_BITS};
pub use stream::{
    decode_stream, encode_stream, is_keyframe, EntryKind, LayerData, ResidualMode, ResidualStream, StreamEntry,
};
