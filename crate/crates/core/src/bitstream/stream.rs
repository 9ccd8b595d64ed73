use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::quant::{check_bits, dequantize, quantize, QuantizedTensor};
use crate::error::{Error, Result};
use crate::hyponet::{HypoNetConfig, TokenMatrix, UniqueParams};

/// What each non-keyframe clip is coded against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResidualMode {
    /// Every clip stores its full parameters.
    None,
    /// Residual against the most recent keyframe's reconstruction.
    First,
    /// Residual against the previous clip's reconstruction.
    #[default]
    Previous,
}

impl ResidualMode {
    pub const ALL: [ResidualMode; 3] = [ResidualMode::None, ResidualMode::First, ResidualMode::Previous];

    pub fn code(self) -> u8 {
        match self {
            ResidualMode::None => 0,
            ResidualMode::First => 1,
            ResidualMode::Previous => 2,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(ResidualMode::None),
            1 => Ok(ResidualMode::First),
            2 => Ok(ResidualMode::Previous),
            _ => Err(Error::Format(format!("unknown residual mode code {code}"))),
        }
    }
}

impl fmt::Display for ResidualMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ResidualMode::None => "none",
            ResidualMode::First => "first",
            ResidualMode::Previous => "previous",
        })
    }
}

impl FromStr for ResidualMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(ResidualMode::None),
            "first" | "from_first" => Ok(ResidualMode::First),
            "previous" | "from_previous" => Ok(ResidualMode::Previous),
            _ => Err(Error::Config(format!("unknown residual mode '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntryKind {
    Full,
    Residual,
}

impl EntryKind {
    pub fn code(self) -> u8 {
        match self {
            EntryKind::Full => 0,
            EntryKind::Residual => 1,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(EntryKind::Full),
            1 => Ok(EntryKind::Residual),
            _ => Err(Error::Format(format!("unknown entry kind {code}"))),
        }
    }
}

/// Coded values for one layer of one clip.
#[derive(Debug, Clone, PartialEq)]
pub enum LayerData {
    Quantized(QuantizedTensor),
    /// Unquantized values kept in f64 so that reconstruction is exact.
    Exact(Vec<f64>),
}

impl LayerData {
    fn len(&self) -> usize {
        match self {
            LayerData::Quantized(q) => q.levels.len(),
            LayerData::Exact(v) => v.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamEntry {
    pub kind: EntryKind,
    /// One tensor per hyponetwork layer; unmodulated layers are empty.
    pub layers: Vec<LayerData>,
}

/// Coded unique-parameter sequence for one tubelet position.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualStream {
    pub position: u32,
    pub mode: ResidualMode,
    pub keyframe_interval: Option<u32>,
    pub entries: Vec<StreamEntry>,
}

/// Whether clip `index` stores full parameters.
pub fn is_keyframe(index: usize, mode: ResidualMode, keyframe_interval: Option<u32>) -> bool {
    index == 0
        || mode == ResidualMode::None
        || keyframe_interval.is_some_and(|k| k > 0 && index % k as usize == 0)
}

fn check_interval(keyframe_interval: Option<u32>) -> Result<()> {
    if keyframe_interval == Some(0) {
        return Err(Error::Config("keyframe interval must be positive".into()));
    }
    Ok(())
}

/// Codes a unique-parameter sequence. With `bits = None` quantization is
/// bypassed and residuals are exact. Residuals are always taken against the
/// decoder-side reconstruction, which is returned alongside the stream.
pub fn encode_stream(
    sequence: &[UniqueParams<f32>],
    mode: ResidualMode,
    bits: Option<u8>,
    keyframe_interval: Option<u32>,
    position: u32,
) -> Result<(ResidualStream, Vec<UniqueParams<f32>>)> {
    let first = sequence
        .first()
        .ok_or_else(|| Error::Config("cannot code an empty clip sequence".into()))?;
    if let Some(b) = bits {
        check_bits(b)?;
    }
    check_interval(keyframe_interval)?;
    let shape_ok = sequence.iter().all(|u| {
        u.layers.len() == first.layers.len()
            && u.layers.iter().zip(&first.layers).all(|(a, b)| a.rows == b.rows && a.cols == b.cols)
    });
    if !shape_ok {
        return Err(Error::Shape("unique parameter shapes differ between clips".into()));
    }

    let mut entries = Vec::with_capacity(sequence.len());
    let mut recon: Vec<UniqueParams<f32>> = Vec::with_capacity(sequence.len());
    let mut key_ref = 0usize;
    for (i, theta) in sequence.iter().enumerate() {
        let kind = if is_keyframe(i, mode, keyframe_interval) {
            key_ref = i;
            EntryKind::Full
        } else {
            EntryKind::Residual
        };
        let reference = match (kind, mode) {
            (EntryKind::Full, _) => None,
            (_, ResidualMode::Previous) => Some(&recon[i - 1]),
            _ => Some(&recon[key_ref]),
        };
        let mut layers = Vec::with_capacity(theta.layers.len());
        let mut rec = theta.clone();
        for (l, tokens) in theta.layers.iter().enumerate() {
            let reference = reference.map(|r| r.layers[l].data.as_slice());
            let (data, values) = code_layer(&tokens.data, reference, bits)?;
            rec.layers[l].data = values;
            layers.push(data);
        }
        entries.push(StreamEntry { kind, layers });
        recon.push(rec);
    }
    Ok((
        ResidualStream {
            position,
            mode,
            keyframe_interval,
            entries,
        },
        recon,
    ))
}

fn code_layer(theta: &[f32], reference: Option<&[f32]>, bits: Option<u8>) -> Result<(LayerData, Vec<f32>)> {
    match (bits, reference) {
        (Some(b), None) => {
            let q = quantize(theta, b)?;
            let values = dequantize(&q);
            Ok((LayerData::Quantized(q), values))
        }
        (Some(b), Some(r)) => {
            let residual: Vec<f32> = theta
                .iter()
                .zip(r)
                .map(|(&t, &p)| (f64::from(t) - f64::from(p)) as f32)
                .collect();
            let q = quantize(&residual, b)?;
            let values = apply_residual(r, &dequantize(&q));
            Ok((LayerData::Quantized(q), values))
        }
        (None, None) => Ok((LayerData::Exact(theta.iter().map(|&v| f64::from(v)).collect()), theta.to_vec())),
        (None, Some(r)) => {
            let residual: Vec<f64> = theta.iter().zip(r).map(|(&t, &p)| f64::from(t) - f64::from(p)).collect();
            let values = apply_exact(r, &residual);
            Ok((LayerData::Exact(residual), values))
        }
    }
}

fn apply_residual(reference: &[f32], residual: &[f32]) -> Vec<f32> {
    reference.iter().zip(residual).map(|(a, b)| a + b).collect()
}

fn apply_exact(reference: &[f32], residual: &[f64]) -> Vec<f32> {
    reference
        .iter()
        .zip(residual)
        .map(|(&a, &b)| (f64::from(a) + b) as f32)
        .collect()
}

/// Rebuilds the dequantized unique-parameter sequence from a stream.
pub fn decode_stream(stream: &ResidualStream, config: &HypoNetConfig) -> Result<Vec<UniqueParams<f32>>> {
    check_interval(stream.keyframe_interval)?;
    let mut out: Vec<UniqueParams<f32>> = Vec::with_capacity(stream.entries.len());
    let mut key_ref = 0usize;
    for (i, entry) in stream.entries.iter().enumerate() {
        let expect_full = is_keyframe(i, stream.mode, stream.keyframe_interval);
        if expect_full != (entry.kind == EntryKind::Full) {
            return Err(Error::Format(format!(
                "entry {i} is {:?} but the stream layout requires {}",
                entry.kind,
                if expect_full { "a full entry" } else { "a residual" }
            )));
        }
        if entry.layers.len() != config.num_layers() {
            return Err(Error::Format(format!(
                "entry {i} has {} layers, config has {}",
                entry.layers.len(),
                config.num_layers()
            )));
        }
        let reference = if expect_full {
            key_ref = i;
            None
        } else if stream.mode == ResidualMode::Previous {
            Some(&out[i - 1])
        } else {
            Some(&out[key_ref])
        };
        let mut layers = Vec::with_capacity(entry.layers.len());
        for (l, (data, spec)) in entry.layers.iter().zip(&config.layers).enumerate() {
            if data.len() != spec.token_count() {
                return Err(Error::Format(format!(
                    "entry {i} layer {l} holds {} values, expected {}",
                    data.len(),
                    spec.token_count()
                )));
            }
            let values = match (data, reference) {
                (LayerData::Quantized(q), None) => dequantize(q),
                (LayerData::Quantized(q), Some(r)) => apply_residual(&r.layers[l].data, &dequantize(q)),
                (LayerData::Exact(v), None) => v.iter().map(|&x| x as f32).collect(),
                (LayerData::Exact(v), Some(r)) => apply_exact(&r.layers[l].data, v),
            };
            layers.push(TokenMatrix {
                rows: spec.tokens,
                cols: spec.token_dim,
                data: values,
            });
        }
        out.push(UniqueParams { layers });
    }
    Ok(out)
}
