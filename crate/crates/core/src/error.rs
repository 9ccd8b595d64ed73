use std::io;

use thiserror::Error;

/// Every fallible operation in the codec reports through this type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("degenerate modulation in layer {layer}: modulated weights have zero RMS")]
    DegenerateModulation { layer: usize },

    #[error("optimization diverged: {0}")]
    Divergence(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("symbol {symbol} outside histogram support of {alphabet} entries")]
    SymbolOutOfRange { symbol: u32, alphabet: usize },

    #[error("truncated data: {0}")]
    Truncated(String),

    #[error("malformed data: {0}")]
    Format(String),

    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },

    #[error("unsupported format version {found} (expected {expected})")]
    Version { expected: u16, found: u16 },

    #[error("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    Checksum { stored: u32, computed: u32 },

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
