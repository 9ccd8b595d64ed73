//! `.tcnv` container: global header, one record per tubelet position, CRC32
//! trailer. All integers little-endian.

use super::arith::{arithmetic_decode, arithmetic_encode, laplace_histogram, FrequencyTable};
use super::bytes::{read_hyponet, verify_crc, write_hyponet, ByteReader, ByteWriter};
use super::quant::{check_bits, QuantizedTensor};
use super::stream::{is_keyframe, EntryKind, LayerData, ResidualMode, ResidualStream, StreamEntry};
use crate::error::{Error, Result};
use crate::hyponet::HypoNetConfig;
use crate::tubelet::{plan_grid, FusionMode, TubeletGrid};

pub const CONTAINER_MAGIC: [u8; 4] = *b"TCNV";
pub const CONTAINER_VERSION: u16 = 1;
/// Trailing partial clips are padded by repeating the last frame.
pub const FRAME_PADDING_REPEAT_LAST: u8 = 0;
/// `k = 3` convolutions use zero padding.
pub const CONV_PADDING_ZERO: u8 = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridParams {
    pub patch_h: u32,
    pub patch_w: u32,
    pub overlap_h: u32,
    pub overlap_w: u32,
    pub fusion: FusionMode,
}

impl GridParams {
    pub fn of(grid: &TubeletGrid) -> Self {
        Self {
            patch_h: grid.patch_h as u32,
            patch_w: grid.patch_w as u32,
            overlap_h: grid.overlap_h as u32,
            overlap_w: grid.overlap_w as u32,
            fusion: grid.fusion,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContainerHeader {
    pub height: u32,
    pub width: u32,
    pub frames: u32,
    /// Clip length is `hyponet.clip_len`.
    pub hyponet: HypoNetConfig,
    pub grid: GridParams,
    pub residual_mode: ResidualMode,
    pub keyframe_interval: Option<u32>,
    pub bits: u8,
    /// CRC32 of the base-parameter file the streams were fitted against.
    pub base_fingerprint: u32,
}

impl ContainerHeader {
    pub fn grid(&self) -> Result<TubeletGrid> {
        plan_grid(
            self.height as usize,
            self.width as usize,
            self.grid.patch_h as usize,
            self.grid.patch_w as usize,
            self.grid.overlap_h as usize,
            self.grid.overlap_w as usize,
        )?
        .with_fusion(self.grid.fusion)
    }

    pub fn clip_count(&self) -> usize {
        (self.frames as usize).div_ceil(self.hyponet.clip_len)
    }

    fn validate(&self) -> Result<()> {
        check_bits(self.bits)?;
        if self.frames == 0 {
            return Err(Error::Config("container needs at least one frame".into()));
        }
        if self.keyframe_interval == Some(0) {
            return Err(Error::Config("keyframe interval must be positive".into()));
        }
        let grid = self.grid()?;
        if grid.patch_h != self.hyponet.patch_height() || grid.patch_w != self.hyponet.patch_width() {
            return Err(Error::Config(format!(
                "grid patch {}x{} differs from hyponetwork output {}x{}",
                grid.patch_h,
                grid.patch_w,
                self.hyponet.patch_height(),
                self.hyponet.patch_width()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CodedContainer {
    pub header: ContainerHeader,
    /// One stream per grid position, ordered by position id.
    pub streams: Vec<ResidualStream>,
}

/// Byte accounting of a serialized container.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ContainerLayout {
    pub header_bytes: usize,
    /// Record fields other than histograms and payloads: position, counts,
    /// and the per-entry quantizer table.
    pub framing_bytes: usize,
    pub histogram_bytes: usize,
    pub payload_bytes: usize,
    pub trailer_bytes: usize,
}

impl ContainerLayout {
    pub fn total(&self) -> usize {
        self.header_bytes + self.framing_bytes + self.histogram_bytes + self.payload_bytes + self.trailer_bytes
    }

    /// Bytes counted toward the bitrate.
    pub fn coded_bytes(&self) -> usize {
        self.histogram_bytes + self.payload_bytes
    }
}

/// Bits per pixel of the coded payload and histograms; the global header,
/// record framing, checksum, and base parameters are not counted.
pub fn compute_bpp(layout: &ContainerLayout, height: usize, width: usize, frames: usize) -> f64 {
    bpp_from_bits(layout.coded_bytes() as u64 * 8, height, width, frames)
}

pub fn bpp_from_bits(bits: u64, height: usize, width: usize, frames: usize) -> f64 {
    bits as f64 / (frames * height * width) as f64
}

fn write_header(w: &mut ByteWriter, h: &ContainerHeader) -> Result<()> {
    w.bytes(&CONTAINER_MAGIC);
    w.u16(CONTAINER_VERSION);
    w.u32(h.height);
    w.u32(h.width);
    w.u32(h.frames);
    w.u8(FRAME_PADDING_REPEAT_LAST);
    w.u8(CONV_PADDING_ZERO);
    write_hyponet(w, &h.hyponet)?;
    w.u32(h.grid.patch_h);
    w.u32(h.grid.patch_w);
    w.u32(h.grid.overlap_h);
    w.u32(h.grid.overlap_w);
    w.u8(h.grid.fusion.code());
    w.u8(h.residual_mode.code());
    w.u32(h.keyframe_interval.unwrap_or(0));
    w.u8(h.bits);
    w.u32(h.base_fingerprint);
    Ok(())
}

fn read_header(r: &mut ByteReader<'_>) -> Result<ContainerHeader> {
    r.magic(CONTAINER_MAGIC)?;
    r.version(CONTAINER_VERSION)?;
    let height = r.u32("height")?;
    let width = r.u32("width")?;
    let frames = r.u32("frame count")?;
    let pad = r.u8("frame padding rule")?;
    let conv = r.u8("conv padding mode")?;
    if pad != FRAME_PADDING_REPEAT_LAST || conv != CONV_PADDING_ZERO {
        return Err(Error::Format(format!("unsupported padding modes ({pad}, {conv})")));
    }
    let hyponet = read_hyponet(r)?;
    let grid = GridParams {
        patch_h: r.u32("patch height")?,
        patch_w: r.u32("patch width")?,
        overlap_h: r.u32("overlap")?,
        overlap_w: r.u32("overlap")?,
        fusion: FusionMode::from_code(r.u8("fusion mode")?).map_err(|e| Error::Format(e.to_string()))?,
    };
    let residual_mode = ResidualMode::from_code(r.u8("residual mode")?)?;
    let keyframe_interval = Some(r.u32("keyframe interval")?).filter(|&k| k > 0);
    let bits = r.u8("quantization bits")?;
    let base_fingerprint = r.u32("base fingerprint")?;
    let header = ContainerHeader {
        height,
        width,
        frames,
        hyponet,
        grid,
        residual_mode,
        keyframe_interval,
        bits,
        base_fingerprint,
    };
    header
        .validate()
        .map_err(|e| Error::Format(format!("invalid container header: {e}")))?;
    Ok(header)
}

/// Serialized length of the global header.
pub fn header_len(header: &ContainerHeader) -> Result<usize> {
    let mut w = ByteWriter::default();
    write_header(&mut w, header)?;
    Ok(w.len())
}

pub fn write_container(container: &CodedContainer) -> Result<Vec<u8>> {
    write_container_with_layout(container).map(|(b, _)| b)
}

pub fn write_container_with_layout(container: &CodedContainer) -> Result<(Vec<u8>, ContainerLayout)> {
    let h = &container.header;
    h.validate()?;
    let grid = h.grid()?;
    if container.streams.len() != grid.len() {
        return Err(Error::Shape(format!(
            "{} streams for a grid of {} positions",
            container.streams.len(),
            grid.len()
        )));
    }
    let mut w = ByteWriter::default();
    write_header(&mut w, h)?;
    let mut layout = ContainerLayout {
        header_bytes: w.len(),
        trailer_bytes: 4,
        ..Default::default()
    };
    let modulated: Vec<usize> = h.hyponet.modulated_layers().collect();
    for (p, s) in container.streams.iter().enumerate() {
        if s.position as usize != p || s.mode != h.residual_mode || s.keyframe_interval != h.keyframe_interval {
            return Err(Error::Format(format!("stream {p} does not match the container header")));
        }
        if s.entries.len() != h.clip_count() {
            return Err(Error::Format(format!(
                "stream {p} has {} entries, video has {} clips",
                s.entries.len(),
                h.clip_count()
            )));
        }
        write_record(&mut w, s, &h.hyponet, &modulated, h.bits, &mut layout)?;
    }
    w.crc_trailer();
    debug_assert_eq!(w.len(), layout.total());
    Ok((w.buf, layout))
}

fn write_record(
    w: &mut ByteWriter,
    s: &ResidualStream,
    config: &HypoNetConfig,
    modulated: &[usize],
    bits: u8,
    layout: &mut ContainerLayout,
) -> Result<()> {
    let start = w.len();
    let mut symbols = Vec::new();
    w.u32(s.position);
    w.count(s.entries.len(), "entry count")?;
    for (i, e) in s.entries.iter().enumerate() {
        if e.layers.len() != config.num_layers() {
            return Err(Error::Shape(format!("entry {i} layer count does not match config")));
        }
        w.u8(e.kind.code());
        for &l in modulated {
            let q = match &e.layers[l] {
                LayerData::Quantized(q) if q.bits == bits => q,
                LayerData::Quantized(q) => {
                    return Err(Error::Format(format!("entry {i} quantized at {} bits, header says {bits}", q.bits)))
                }
                LayerData::Exact(_) => {
                    return Err(Error::Format("unquantized streams cannot be written to a container".into()))
                }
            };
            if q.levels.len() != config.layers[l].token_count() {
                return Err(Error::Shape(format!("entry {i} layer {l} has the wrong token count")));
            }
            w.f32(q.scale);
            w.f32(q.offset);
            symbols.extend(q.levels.iter().map(|&v| u32::from(v)));
        }
    }
    let counts = laplace_histogram(&symbols, 1 << bits)?;
    let table = FrequencyTable::from_counts(&counts)?;
    let payload = arithmetic_encode(&symbols, &table)?;
    w.count(symbols.len(), "symbol count")?;
    let hist_start = w.len();
    counts.iter().for_each(|&c| w.u32(c));
    layout.histogram_bytes += w.len() - hist_start;
    w.count(payload.len(), "payload length")?;
    w.bytes(&payload);
    layout.payload_bytes += payload.len();
    layout.framing_bytes += w.len() - start - (counts.len() * 4) - payload.len();
    Ok(())
}

pub fn read_container(bytes: &[u8]) -> Result<CodedContainer> {
    read_container_with_layout(bytes).map(|(c, _)| c)
}

pub fn read_container_with_layout(bytes: &[u8]) -> Result<(CodedContainer, ContainerLayout)> {
    let body = verify_crc(bytes)?;
    let mut r = ByteReader::new(body);
    let header = read_header(&mut r)?;
    let mut layout = ContainerLayout {
        header_bytes: r.pos(),
        trailer_bytes: 4,
        ..Default::default()
    };
    let grid = header.grid()?;
    let modulated: Vec<usize> = header.hyponet.modulated_layers().collect();
    let mut streams = Vec::with_capacity(grid.len());
    for p in 0..grid.len() {
        streams.push(read_record(&mut r, &header, p, &modulated, &mut layout)?);
    }
    if r.remaining() != 0 {
        return Err(Error::Format(format!("{} unexpected bytes after the last stream", r.remaining())));
    }
    Ok((CodedContainer { header, streams }, layout))
}

fn read_record(
    r: &mut ByteReader<'_>,
    h: &ContainerHeader,
    p: usize,
    modulated: &[usize],
    layout: &mut ContainerLayout,
) -> Result<ResidualStream> {
    let start = r.pos();
    let position = r.u32("stream position")?;
    if position as usize != p {
        return Err(Error::Format(format!("stream {p} is labelled position {position}")));
    }
    let n_entries = r.usize("entry count")?;
    if n_entries != h.clip_count() {
        return Err(Error::Format(format!(
            "stream {p} has {n_entries} entries, video has {} clips",
            h.clip_count()
        )));
    }
    let mut table = Vec::with_capacity(n_entries);
    for i in 0..n_entries {
        let kind = EntryKind::from_code(r.u8("entry kind")?)?;
        if (kind == EntryKind::Full) != is_keyframe(i, h.residual_mode, h.keyframe_interval) {
            return Err(Error::Format(format!("stream {p} entry {i} has the wrong kind")));
        }
        let mut q = Vec::with_capacity(modulated.len());
        for _ in modulated {
            let scale = r.f32("scale")?;
            let offset = r.f32("offset")?;
            if !(scale.is_finite() && scale >= 0.0 && offset.is_finite()) {
                return Err(Error::Format(format!("stream {p} entry {i} has a bad quantizer ({scale}, {offset})")));
            }
            q.push((scale, offset));
        }
        table.push((kind, q));
    }
    let per_entry: usize = modulated.iter().map(|&l| h.hyponet.layers[l].token_count()).sum();
    let symbol_count = r.usize("symbol count")?;
    if symbol_count != per_entry * n_entries {
        return Err(Error::Format(format!(
            "stream {p} declares {symbol_count} symbols, expected {}",
            per_entry * n_entries
        )));
    }
    let alphabet = 1usize << h.bits;
    let hist_start = r.pos();
    let counts = (0..alphabet).map(|_| r.u32("histogram")).collect::<Result<Vec<_>>>()?;
    layout.histogram_bytes += r.pos() - hist_start;
    let freq = FrequencyTable::from_counts(&counts).map_err(|e| Error::Format(e.to_string()))?;
    let payload_len = r.usize("payload length")?;
    let payload = r.take(payload_len, "payload")?;
    layout.payload_bytes += payload_len;
    layout.framing_bytes += r.pos() - start - alphabet * 4 - payload_len;
    let symbols = arithmetic_decode(payload, &freq, symbol_count)?;

    let mut at = 0;
    let entries = table
        .into_iter()
        .map(|(kind, quant)| {
            let mut layers: Vec<LayerData> = h
                .hyponet
                .layers
                .iter()
                .map(|_| {
                    LayerData::Quantized(QuantizedTensor {
                        levels: Vec::new(),
                        bits: h.bits,
                        scale: 0.0,
                        offset: 0.0,
                    })
                })
                .collect();
            for (&l, (scale, offset)) in modulated.iter().zip(quant) {
                let n = h.hyponet.layers[l].token_count();
                let levels = symbols[at..at + n].iter().map(|&s| s as u8).collect();
                at += n;
                layers[l] = LayerData::Quantized(QuantizedTensor {
                    levels,
                    bits: h.bits,
                    scale,
                    offset,
                });
            }
            StreamEntry { kind, layers }
        })
        .collect();
    Ok(ResidualStream {
        position,
        mode: h.residual_mode,
        keyframe_interval: h.keyframe_interval,
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::super::stream::encode_stream;
    use super::*;
    use crate::hyponet::UniqueParams;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sample(seed: u64, bits: u8, mode: ResidualMode) -> CodedContainer {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let hyponet = HypoNetConfig::tiny();
        let header = ContainerHeader {
            height: 64,
            width: 48,
            frames: 20,
            hyponet: hyponet.clone(),
            grid: GridParams {
                patch_h: 32,
                patch_w: 32,
                overlap_h: 0,
                overlap_w: 16,
                fusion: FusionMode::Blend,
            },
            residual_mode: mode,
            keyframe_interval: Some(2),
            bits,
            base_fingerprint: rng.gen(),
        };
        let streams = (0..4)
            .map(|p| {
                let seq: Vec<UniqueParams<f32>> = (0..3)
                    .map(|_| {
                        let mut u = UniqueParams::identity(&hyponet);
                        u.layers
                            .iter_mut()
                            .for_each(|t| t.data.iter_mut().for_each(|v| *v += rng.gen_range(-0.5..0.5)));
                        u
                    })
                    .collect();
                encode_stream(&seq, mode, Some(bits), Some(2), p).unwrap().0
            })
            .collect();
        CodedContainer { header, streams }
    }

    #[test]
    fn round_trip_and_layout() {
        for (seed, bits) in [(0, 4), (1, 6), (2, 8)] {
            for mode in ResidualMode::ALL {
                let c = sample(seed, bits, mode);
                let (bytes, layout) = write_container_with_layout(&c).unwrap();
                assert_eq!(layout.total(), bytes.len());
                assert_eq!(layout.histogram_bytes, 4 * (1 << bits) * 4);
                let (back, read_layout) = read_container_with_layout(&bytes).unwrap();
                assert_eq!(back, c);
                assert_eq!(read_layout, layout);
                assert_eq!(write_container(&back).unwrap(), bytes);
            }
        }
    }

    #[test]
    fn corruption_is_detected() {
        let bytes = write_container(&sample(3, 4, ResidualMode::Previous)).unwrap();
        let n = bytes.len();
        for at in [0, 10, n / 2, n - 5, n - 1] {
            let mut bad = bytes.clone();
            bad[at] ^= 0x40;
            assert!(matches!(read_container(&bad), Err(Error::Checksum { .. })), "offset {at}");
        }
        assert!(read_container(&bytes[..n - 1]).is_err());
        assert!(read_container(&[]).is_err());
    }

    fn resealed(mut body: Vec<u8>) -> Vec<u8> {
        let crc = crc32fast::hash(&body);
        body.extend_from_slice(&crc.to_le_bytes());
        body
    }

    #[test]
    fn magic_and_version_checked() {
        let bytes = write_container(&sample(4, 4, ResidualMode::First)).unwrap();
        let mut body = bytes[..bytes.len() - 4].to_vec();
        body[0] = b'X';
        assert!(matches!(read_container(&resealed(body)), Err(Error::BadMagic { .. })));
        let mut body = bytes[..bytes.len() - 4].to_vec();
        body[4] = 9;
        assert!(matches!(
            read_container(&resealed(body)),
            Err(Error::Version { expected: 1, found: 9 })
        ));
    }

    #[test]
    fn header_of_large_patch_config_is_small() {
        let header = ContainerHeader {
            height: 720,
            width: 1280,
            frames: 600,
            hyponet: HypoNetConfig::patch_320x160(),
            grid: GridParams {
                patch_h: 160,
                patch_w: 320,
                overlap_h: 5,
                overlap_w: 0,
                fusion: FusionMode::Crop,
            },
            residual_mode: ResidualMode::Previous,
            keyframe_interval: None,
            bits: 4,
            base_fingerprint: 0,
        };
        let n = header_len(&header).unwrap();
        // magic, version, dims, padding flags, hyponet, grid, coding fields
        assert_eq!(n, 4 + 2 + 12 + 2 + (16 + 4 * 13) + 17 + 1 + 4 + 1 + 4);
        assert!(n < 4096);
    }

    #[test]
    fn bpp_accounting() {
        let layout = ContainerLayout {
            header_bytes: 77,
            framing_bytes: 20,
            histogram_bytes: 64,
            payload_bytes: 61,
            trailer_bytes: 4,
        };
        assert_eq!(compute_bpp(&layout, 10, 10, 10), 1.0);
        assert_eq!(compute_bpp(&layout, 10, 10, 20), 0.5);
    }

    #[test]
    fn rejects_inconsistent_containers() {
        let mut c = sample(5, 4, ResidualMode::Previous);
        c.streams.pop();
        assert!(write_container(&c).is_err());
        let mut c = sample(5, 4, ResidualMode::Previous);
        c.header.bits = 5;
        assert!(write_container(&c).is_err());
        let mut c = sample(5, 4, ResidualMode::Previous);
        c.header.grid.patch_w = 16;
        assert!(write_container(&c).is_err());
    }
}
