//! Byte-oriented range coder over 16-bit cumulative frequency tables, and
//! a plain MSB-first bit writer for fixed-length fields.
//!
//! Coder state is a 33-bit `low` kept in a `u64` and a 32-bit `range`.
//! Encoding symbol `s` with table `cum` does
//!
//! ```text
//! r      = range >> 16
//! low   += r * cum[s]
//! range  = r * (cum[s+1] - cum[s])
//! while range < 2^24 { range <<= 8; shift_low() }
//! ```
//!
//! `shift_low` emits the top byte of `low`, holding back one byte plus any
//! run of `0xFF` bytes until a carry out of bit 32 can no longer reach them.
//! The stream starts with one zero byte and `finish` performs five more
//! shifts, so a stream coding `n` renormalizations is exactly `n + 5` bytes
//! long and the decoder consumes every byte of it.

use crate::error::{Error, Result};
use crate::probmodel::{QuantizedCdf, CDF_BITS, CDF_TOTAL};

const TOP: u32 = 1 << 24;

#[derive(Debug, Clone)]
pub struct RangeEncoder {
    low: u64,
    range: u32,
    cache: u8,
    pending: u64,
    out: Vec<u8>,
}

impl Default for RangeEncoder {
    fn default() -> Self {
        Self::new()
    }
}

impl RangeEncoder {
    pub fn new() -> Self {
        Self {
            low: 0,
            range: u32::MAX,
            cache: 0,
            pending: 1,
            out: Vec::new(),
        }
    }

    fn shift_low(&mut self) {
        if (self.low as u32) < 0xFF00_0000 || (self.low >> 32) != 0 {
            let carry = (self.low >> 32) as u8;
            let mut byte = self.cache;
            loop {
                self.out.push(byte.wrapping_add(carry));
                byte = 0xFF;
                self.pending -= 1;
                if self.pending == 0 {
                    break;
                }
            }
            self.cache = (self.low >> 24) as u8;
        }
        self.pending += 1;
        self.low = (self.low & 0x00FF_FFFF) << 8;
    }

    /// Encodes symbol `sym` of a cumulative table (`cum[0] = 0`,
    /// `cum[n] = 2^16`).
    pub fn encode_cum(&mut self, cum: &[u32], sym: usize) -> Result<()> {
        if sym + 1 >= cum.len() {
            return Err(Error::Argument(format!(
                "symbol {sym} outside alphabet of {}",
                cum.len().saturating_sub(1)
            )));
        }
        let (start, end) = (cum[sym], cum[sym + 1]);
        debug_assert!(end > start && *cum.last().unwrap() == CDF_TOTAL);
        let r = self.range >> CDF_BITS;
        self.low += r as u64 * start as u64;
        self.range = r * (end - start);
        while self.range < TOP {
            self.range <<= 8;
            self.shift_low();
        }
        Ok(())
    }

    pub fn encode(&mut self, cdf: &QuantizedCdf, sym: usize) -> Result<()> {
        self.encode_cum(cdf.cum(), sym)
    }

    /// Bytes emitted so far, not counting held-back bytes.
    pub fn bytes_written(&self) -> usize {
        self.out.len()
    }

    pub fn finish(mut self) -> Vec<u8> {
        for _ in 0..5 {
            self.shift_low();
        }
        self.out
    }
}

#[derive(Debug, Clone)]
pub struct RangeDecoder<'a> {
    code: u32,
    range: u32,
    input: &'a [u8],
    pos: usize,
}

impl<'a> RangeDecoder<'a> {
    pub fn new(input: &'a [u8]) -> Result<Self> {
        if input.len() < 5 {
            return Err(Error::Corruption(format!(
                "coded segment of {} bytes is shorter than the 5-byte preamble",
                input.len()
            )));
        }
        let mut dec = Self {
            code: 0,
            range: u32::MAX,
            input,
            pos: 0,
        };
        for _ in 0..5 {
            let b = dec.next_byte()?;
            dec.code = (dec.code << 8) | b as u32;
        }
        Ok(dec)
    }

    fn next_byte(&mut self) -> Result<u8> {
        let b = *self
            .input
            .get(self.pos)
            .ok_or_else(|| Error::Corruption("coded segment exhausted".into()))?;
        self.pos += 1;
        Ok(b)
    }

    pub fn decode_cum(&mut self, cum: &[u32]) -> Result<usize> {
        if cum.len() < 2 {
            return Err(Error::Argument("empty alphabet".into()));
        }
        let r = self.range >> CDF_BITS;
        let target = self.code / r;
        if target >= CDF_TOTAL {
            return Err(Error::Corruption("code point outside the coding interval".into()));
        }
        // Last index whose cumulative start is <= target.
        let sym = cum.partition_point(|&c| c <= target) - 1;
        let sym = sym.min(cum.len() - 2);
        let (start, end) = (cum[sym], cum[sym + 1]);
        self.code -= r * start;
        self.range = r * (end - start);
        while self.range < TOP {
            self.code = (self.code << 8) | self.next_byte()? as u32;
            self.range <<= 8;
        }
        Ok(sym)
    }

    pub fn decode(&mut self, cdf: &QuantizedCdf) -> Result<usize> {
        self.decode_cum(cdf.cum())
    }

    pub fn consumed(&self) -> usize {
        self.pos
    }

    /// Succeeds only if the whole segment was consumed.
    pub fn finish(self) -> Result<()> {
        if self.pos != self.input.len() {
            return Err(Error::Corruption(format!(
                "{} unread bytes after the last symbol",
                self.input.len() - self.pos
            )));
        }
        Ok(())
    }
}

/// MSB-first bit writer.
#[derive(Debug, Default, Clone)]
pub struct BitSink {
    bytes: Vec<u8>,
    acc: u64,
    nacc: u32,
}

impl BitSink {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn write_fixed(&mut self, value: u32, nbits: u32) -> Result<()> {
        if nbits == 0 || nbits > 32 || (nbits < 32 && value >> nbits != 0) {
            return Err(Error::Argument(format!(
                "{value} does not fit in {nbits} bits"
            )));
        }
        self.acc = (self.acc << nbits) | value as u64;
        self.nacc += nbits;
        while self.nacc >= 8 {
            self.nacc -= 8;
            self.bytes.push((self.acc >> self.nacc) as u8);
        }
        self.acc &= (1u64 << self.nacc) - 1;
        Ok(())
    }

    pub fn bits_written(&self) -> usize {
        self.bytes.len() * 8 + self.nacc as usize
    }

    /// Pads the final byte with zero bits.
    pub fn finish(mut self) -> Vec<u8> {
        if self.nacc > 0 {
            self.bytes.push((self.acc << (8 - self.nacc)) as u8);
        }
        self.bytes
    }
}

#[derive(Debug, Clone)]
pub struct BitSource<'a> {
    bytes: &'a [u8],
    bit: usize,
}

impl<'a> BitSource<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, bit: 0 }
    }

    pub fn read_fixed(&mut self, nbits: u32) -> Result<u32> {
        if nbits == 0 || nbits > 32 {
            return Err(Error::Argument(format!("cannot read {nbits} bits")));
        }
        if self.bit + nbits as usize > self.bytes.len() * 8 {
            return Err(Error::Corruption("fixed-length segment exhausted".into()));
        }
        let mut v: u64 = 0;
        for _ in 0..nbits {
            let byte = self.bytes[self.bit / 8];
            let b = (byte >> (7 - self.bit % 8)) & 1;
            v = (v << 1) | b as u64;
            self.bit += 1;
        }
        Ok(v as u32)
    }

    pub fn bits_read(&self) -> usize {
        self.bit
    }
}
