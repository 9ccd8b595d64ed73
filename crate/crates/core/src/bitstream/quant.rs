use crate::error::{Error, Result};

pub const MIN_BITS: u8 = 4;
pub const MAX_BITS: u8 = 8;

/// Uniformly quantized tensor: `value ~ offset + level * scale`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedTensor {
    pub levels: Vec<u8>,
    pub bits: u8,
    pub scale: f32,
    pub offset: f32,
}

impl QuantizedTensor {
    pub fn max_level(&self) -> u8 {
        max_level(self.bits)
    }
}

#[inline]
fn max_level(bits: u8) -> u8 {
    ((1u16 << bits) - 1) as u8
}

pub fn check_bits(bits: u8) -> Result<()> {
    if (MIN_BITS..=MAX_BITS).contains(&bits) {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "quantization bits must be in {MIN_BITS}..={MAX_BITS}, got {bits}"
        )))
    }
}

/// Min/max uniform quantization with `2^bits` levels. A constant tensor gets
/// scale 0 and all-zero levels.
pub fn quantize(values: &[f32], bits: u8) -> Result<QuantizedTensor> {
    check_bits(bits)?;
    quantize_levels(values, bits, max_level(bits))
}

/// Same as [`quantize`] but allows any bit depth from 1 to 8; used for
/// small lattice examples.
pub(crate) fn quantize_levels(values: &[f32], bits: u8, top: u8) -> Result<QuantizedTensor> {
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("cannot quantize {v}")));
    }
    if values.is_empty() {
        return Ok(QuantizedTensor {
            levels: Vec::new(),
            bits,
            scale: 0.0,
            offset: 0.0,
        });
    }
    let (min, max) = values
        .iter()
        .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let scale = ((f64::from(max) - f64::from(min)) / f64::from(top)) as f32;
    let levels = if scale == 0.0 {
        vec![0; values.len()]
    } else {
        let (s, lo) = (f64::from(scale), f64::from(min));
        values
            .iter()
            .map(|&v| ((f64::from(v) - lo) / s).round().clamp(0.0, f64::from(top)) as u8)
            .collect()
    };
    Ok(QuantizedTensor {
        levels,
        bits,
        scale,
        offset: min,
    })
}

pub fn dequantize(q: &QuantizedTensor) -> Vec<f32> {
    let (s, o) = (f64::from(q.scale), f64::from(q.offset));
    q.levels.iter().map(|&l| (o + f64::from(l) * s) as f32).collect()
}
