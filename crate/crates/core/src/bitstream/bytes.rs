use crate::error::{Error, Result};
use crate::hyponet::{HypoNetConfig, LayerSpec};

#[derive(Default)]
pub(crate) struct ByteWriter {
    pub buf: Vec<u8>,
}

impl ByteWriter {
    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u16(&mut self, v: u16) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f32(&mut self, v: f32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn bytes(&mut self, v: &[u8]) {
        self.buf.extend_from_slice(v);
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    /// Writes a size as u32, failing if it does not fit.
    pub fn count(&mut self, v: usize, what: &str) -> Result<()> {
        let v = u32::try_from(v).map_err(|_| Error::Format(format!("{what} {v} exceeds u32")))?;
        self.u32(v);
        Ok(())
    }

    pub fn crc_trailer(&mut self) {
        let crc = crc32fast::hash(&self.buf);
        self.u32(crc);
    }
}

pub(crate) struct ByteReader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    pub fn pos(&self) -> usize {
        self.pos
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return Err(Error::Truncated(format!(
                "need {n} bytes for {what} at offset {}, {} left",
                self.pos,
                self.remaining()
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn array<const N: usize>(&mut self, what: &str) -> Result<[u8; N]> {
        Ok(self.take(N, what)?.try_into().expect("length checked"))
    }

    pub fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.array::<1>(what)?[0])
    }

    pub fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.array(what)?))
    }

    pub fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array(what)?))
    }

    pub fn usize(&mut self, what: &str) -> Result<usize> {
        Ok(self.u32(what)? as usize)
    }

    pub fn f32(&mut self, what: &str) -> Result<f32> {
        Ok(f32::from_le_bytes(self.array(what)?))
    }

    pub fn magic(&mut self, expected: [u8; 4]) -> Result<()> {
        let found = self.array::<4>("magic")?;
        if found != expected {
            return Err(Error::BadMagic { expected, found });
        }
        Ok(())
    }

    pub fn version(&mut self, expected: u16) -> Result<()> {
        let found = self.u16("version")?;
        if found != expected {
            return Err(Error::Version { expected, found });
        }
        Ok(())
    }
}

/// Splits off and verifies the CRC32 trailer, returning the covered bytes.
pub(crate) fn verify_crc(bytes: &[u8]) -> Result<&[u8]> {
    // magic, version, checksum
    if bytes.len() < 10 {
        return Err(Error::Truncated("file shorter than magic, version and checksum".into()));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().expect("4 bytes"));
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(Error::Checksum { stored, computed });
    }
    Ok(body)
}

pub(crate) fn write_hyponet(w: &mut ByteWriter, c: &HypoNetConfig) -> Result<()> {
    c.validate()?;
    w.count(c.pe_dim, "pe_dim")?;
    w.count(c.channel_width, "channel width")?;
    w.count(c.clip_len, "clip length")?;
    w.count(c.layers.len(), "layer count")?;
    for l in &c.layers {
        let narrow = |v: usize, what: &str| u16::try_from(v).map_err(|_| Error::Format(format!("{what} {v} exceeds u16")));
        w.u8(u8::try_from(l.kernel).map_err(|_| Error::Format("kernel exceeds u8".into()))?);
        w.u16(narrow(l.stride_h, "stride")?);
        w.u16(narrow(l.stride_w, "stride")?);
        w.count(l.tokens, "token rows")?;
        w.count(l.token_dim, "token dim")?;
    }
    Ok(())
}

pub(crate) fn read_hyponet(r: &mut ByteReader<'_>) -> Result<HypoNetConfig> {
    let pe_dim = r.usize("pe_dim")?;
    let channel_width = r.usize("channel width")?;
    let clip_len = r.usize("clip length")?;
    let n = r.usize("layer count")?;
    if n > 64 {
        return Err(Error::Format(format!("implausible layer count {n}")));
    }
    let mut layers = Vec::with_capacity(n);
    for _ in 0..n {
        let kernel = r.u8("kernel")? as usize;
        let stride_h = r.u16("stride")? as usize;
        let stride_w = r.u16("stride")? as usize;
        let tokens = r.usize("token rows")?;
        let token_dim = r.usize("token dim")?;
        layers.push(LayerSpec::new(kernel, stride_h, stride_w, tokens, token_dim));
    }
    let config = HypoNetConfig {
        pe_dim,
        channel_width,
        clip_len,
        layers,
    };
    config
        .validate()
        .map_err(|e| Error::Format(format!("stored hyponetwork config is invalid: {e}")))?;
    Ok(config)
}
