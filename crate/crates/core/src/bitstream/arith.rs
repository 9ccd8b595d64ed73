//! Static-model binary arithmetic coder with 32-bit integer state.

use crate::error::{Error, Result};

const STATE_BITS: u32 = 32;
const TOP: u64 = (1 << STATE_BITS) - 1;
const HALF: u64 = 1 << (STATE_BITS - 1);
const QUARTER: u64 = 1 << (STATE_BITS - 2);
/// Largest total count the model may carry; keeps every nonzero symbol
/// representable after renormalization.
pub const MAX_TOTAL: u64 = QUARTER;

/// Cumulative frequency table built from symbol counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrequencyTable {
    cum: Vec<u64>,
}

impl FrequencyTable {
    pub fn from_counts(counts: &[u32]) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::Config("empty histogram".into()));
        }
        let mut cum = Vec::with_capacity(counts.len() + 1);
        cum.push(0u64);
        let mut acc = 0u64;
        for &c in counts {
            acc += u64::from(c);
            cum.push(acc);
        }
        if acc == 0 || acc > MAX_TOTAL {
            return Err(Error::Config(format!(
                "histogram total {acc} outside 1..={MAX_TOTAL}"
            )));
        }
        Ok(Self { cum })
    }

    pub fn alphabet(&self) -> usize {
        self.cum.len() - 1
    }

    pub fn total(&self) -> u64 {
        self.cum[self.alphabet()]
    }

    fn range(&self, symbol: u32) -> Result<(u64, u64)> {
        let s = symbol as usize;
        if s >= self.alphabet() || self.cum[s] == self.cum[s + 1] {
            return Err(Error::SymbolOutOfRange {
                symbol,
                alphabet: self.alphabet(),
            });
        }
        Ok((self.cum[s], self.cum[s + 1]))
    }

    fn lookup(&self, scaled: u64) -> usize {
        // last index with cum[i] <= scaled; zero-width symbols are skipped
        self.cum.partition_point(|&c| c <= scaled) - 1
    }
}

/// Histogram of `symbols` over `alphabet` values with +1 smoothing.
pub fn laplace_histogram(symbols: &[u32], alphabet: usize) -> Result<Vec<u32>> {
    let mut counts = vec![1u32; alphabet];
    for &s in symbols {
        let slot = counts.get_mut(s as usize).ok_or(Error::SymbolOutOfRange {
            symbol: s,
            alphabet,
        })?;
        *slot = slot
            .checked_add(1)
            .ok_or_else(|| Error::Config("histogram count overflow".into()))?;
    }
    Ok(counts)
}

#[derive(Default)]
struct BitWriter {
    bytes: Vec<u8>,
    acc: u8,
    used: u32,
}

impl BitWriter {
    fn push(&mut self, bit: bool) {
        self.acc = (self.acc << 1) | bit as u8;
        self.used += 1;
        if self.used == 8 {
            self.bytes.push(self.acc);
            self.acc = 0;
            self.used = 0;
        }
    }

    fn push_with_pending(&mut self, bit: bool, pending: &mut u64) {
        self.push(bit);
        for _ in 0..*pending {
            self.push(!bit);
        }
        *pending = 0;
    }

    fn finish(mut self) -> Vec<u8> {
        if self.used > 0 {
            self.acc <<= 8 - self.used;
            self.bytes.push(self.acc);
        }
        self.bytes
    }
}

struct BitReader<'a> {
    bytes: &'a [u8],
    pos: u64,
}

impl BitReader<'_> {
    fn next(&mut self) -> u64 {
        let byte = (self.pos / 8) as usize;
        let bit = match self.bytes.get(byte) {
            Some(b) => u64::from((b >> (7 - self.pos % 8)) & 1),
            None => 0,
        };
        self.pos += 1;
        bit
    }

    fn overrun(&self) -> u64 {
        self.pos.saturating_sub(self.bytes.len() as u64 * 8)
    }
}

pub fn arithmetic_encode(symbols: &[u32], table: &FrequencyTable) -> Result<Vec<u8>> {
    if symbols.is_empty() {
        return Ok(Vec::new());
    }
    let total = table.total();
    let (mut low, mut high) = (0u64, TOP);
    let mut pending = 0u64;
    let mut out = BitWriter::default();
    for &s in symbols {
        let (c_lo, c_hi) = table.range(s)?;
        let range = high - low + 1;
        high = low + range * c_hi / total - 1;
        low += range * c_lo / total;
        loop {
            if high < HALF {
                out.push_with_pending(false, &mut pending);
            } else if low >= HALF {
                out.push_with_pending(true, &mut pending);
                low -= HALF;
                high -= HALF;
            } else if low >= QUARTER && high < HALF + QUARTER {
                pending += 1;
                low -= QUARTER;
                high -= QUARTER;
            } else {
                break;
            }
            low <<= 1;
            high = (high << 1) | 1;
        }
    }
    // emit all of `low` so the decoder never reads past the payload
    out.push_with_pending(low & HALF != 0, &mut pending);
    for i in (0..STATE_BITS - 1).rev() {
        out.push(low >> i & 1 != 0);
    }
    Ok(out.finish())
}

pub fn arithmetic_decode(bytes: &[u8], table: &FrequencyTable, count: usize) -> Result<Vec<u32>> {
    let mut symbols = Vec::with_capacity(count);
    if count == 0 {
        return Ok(symbols);
    }
    let total = table.total();
    let mut input = BitReader { bytes, pos: 0 };
    let mut value = 0u64;
    for _ in 0..STATE_BITS {
        value = (value << 1) | input.next();
    }
    let (mut low, mut high) = (0u64, TOP);
    for _ in 0..count {
        if value < low || value > high {
            return Err(corrupt(bytes.len(), symbols.len(), count));
        }
        let range = high - low + 1;
        let scaled = ((value - low + 1) * total - 1) / range;
        let s = table.lookup(scaled);
        let (c_lo, c_hi) = (table.cum[s], table.cum[s + 1]);
        high = low + range * c_hi / total - 1;
        low += range * c_lo / total;
        loop {
            if high < HALF {
            } else if low >= HALF {
                low -= HALF;
                high -= HALF;
                value -= HALF;
            } else if low >= QUARTER && high < HALF + QUARTER {
                low -= QUARTER;
                high -= QUARTER;
                value -= QUARTER;
            } else {
                break;
            }
            low <<= 1;
            high = (high << 1) | 1;
            value = (value << 1) | input.next();
        }
        symbols.push(s as u32);
    }
    if input.overrun() > 0 {
        return Err(corrupt(bytes.len(), count, count));
    }
    Ok(symbols)
}

fn corrupt(len: usize, at: usize, count: usize) -> Error {
    Error::Truncated(format!(
        "arithmetic payload of {len} bytes is too short for {count} symbols (failed at symbol {at})"
    ))
}
