//! `.tcnb` base-parameter file: hyponetwork config followed by every layer's
//! weights and biases as f32, CRC32 trailer.

use super::bytes::{read_hyponet, verify_crc, write_hyponet, ByteReader, ByteWriter};
use crate::error::{Error, Result};
use crate::hyponet::{BaseParams, HypoNetConfig};
use crate::kernels::ConvLayerParams;

pub const BASE_MAGIC: [u8; 4] = *b"TCNB";
pub const BASE_VERSION: u16 = 1;

pub fn write_base(config: &HypoNetConfig, base: &BaseParams<f32>) -> Result<Vec<u8>> {
    base.check_shape(config)?;
    let mut w = ByteWriter::default();
    w.bytes(&BASE_MAGIC);
    w.u16(BASE_VERSION);
    write_hyponet(&mut w, config)?;
    for p in &base.layers {
        p.weight.iter().chain(&p.bias).for_each(|&v| w.f32(v));
    }
    w.crc_trailer();
    Ok(w.buf)
}

pub fn read_base(bytes: &[u8]) -> Result<(HypoNetConfig, BaseParams<f32>)> {
    let body = verify_crc(bytes)?;
    let mut r = ByteReader::new(body);
    r.magic(BASE_MAGIC)?;
    r.version(BASE_VERSION)?;
    let config = read_hyponet(&mut r)?;
    let expected: usize = config.base_param_count() * 4;
    if r.remaining() != expected {
        return Err(Error::Format(format!(
            "base file holds {} parameter bytes, config needs {expected}",
            r.remaining()
        )));
    }
    let mut layers = Vec::with_capacity(config.num_layers());
    for l in 0..config.num_layers() {
        let mut p = ConvLayerParams::zeros(config.conv_out_channels(l), config.in_channels(l), config.layers[l].kernel);
        for v in p.weight.iter_mut().chain(p.bias.iter_mut()) {
            *v = r.f32("parameter")?;
        }
        layers.push(p);
    }
    let base = BaseParams { layers };
    if !base.to_flat().iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("base file contains non-finite parameters".into()));
    }
    Ok((config, base))
}

/// Identifies a base file by its stored checksum; containers record it so
/// decoders can refuse a mismatched base.
pub fn base_fingerprint(bytes: &[u8]) -> Result<u32> {
    verify_crc(bytes).map(crc32fast::hash)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        for config in [HypoNetConfig::tiny(), HypoNetConfig::micro(), HypoNetConfig::patch_320x160()] {
            let base = BaseParams::<f32>::init(&config, 7).unwrap();
            let bytes = write_base(&config, &base).unwrap();
            assert_eq!(bytes.len(), 4 + 2 + 16 + 13 * config.num_layers() + 4 * config.base_param_count() + 4);
            let (c, b) = read_base(&bytes).unwrap();
            assert_eq!((c, b), (config, base));
        }
    }

    #[test]
    fn detects_damage_and_mismatch() {
        let config = HypoNetConfig::micro();
        let base = BaseParams::<f32>::init(&config, 1).unwrap();
        let bytes = write_base(&config, &base).unwrap();
        let mut bad = bytes.clone();
        bad[30] ^= 1;
        assert!(matches!(read_base(&bad), Err(Error::Checksum { .. })));
        assert!(write_base(&HypoNetConfig::tiny(), &base).is_err());
        let other = write_base(&config, &BaseParams::init(&config, 2).unwrap()).unwrap();
        assert_ne!(base_fingerprint(&bytes).unwrap(), base_fingerprint(&other).unwrap());
        assert!(base_fingerprint(&bad).is_err());
    }
}
