//! Binary range coder driven by adaptive per-context counts.
//!
//! The probability of a 0 in context `c` is `c0 / (c0 + c1)` with both
//! counts starting at 1 and incremented after every coded bit, so encoder
//! and decoder stay in lockstep as long as they see the same contexts.

use crate::error::{Error, Result};
use crate::generic::AdaptiveCounts;

const PROB_BITS: u32 = 16;
const TOP: u32 = 1 << 24;

/// 16-bit probability of a 0 bit, kept away from 0 and 1.
#[inline]
fn prob_zero(c0: u32, c1: u32) -> u32 {
    let p = ((c0 as u64) << PROB_BITS) / (c0 as u64 + c1 as u64);
    p.clamp(1, (1 << PROB_BITS) - 1) as u32
}

pub struct ArithEncoder {
    low: u64,
    range: u32,
    cache: u8,
    cache_size: u64,
    out: Vec<u8>,
    counts: AdaptiveCounts,
}

impl ArithEncoder {
    /// Encoder with `contexts` adaptive contexts.
    pub fn new(contexts: usize) -> Self {
        Self {
            low: 0,
            range: u32::MAX,
            cache: 0,
            cache_size: 1,
            out: Vec::new(),
            counts: AdaptiveCounts::new(contexts),
        }
    }

    pub fn counts(&self) -> &AdaptiveCounts {
        &self.counts
    }

    /// Forgets all adaptation; coder state is untouched.
    pub fn reset_counts(&mut self) {
        self.counts = AdaptiveCounts::new(self.counts.len());
    }

    fn shift_low(&mut self) {
        if (self.low as u32) < 0xFF00_0000 || (self.low >> 32) != 0 {
            let carry = (self.low >> 32) as u8;
            let mut byte = self.cache;
            loop {
                self.out.push(byte.wrapping_add(carry));
                byte = 0xFF;
                self.cache_size -= 1;
                if self.cache_size == 0 {
                    break;
                }
            }
            self.cache = (self.low >> 24) as u8;
        }
        self.cache_size += 1;
        self.low = (self.low & 0x00FF_FFFF) << 8;
    }

    #[inline]
    fn encode_with(&mut self, bit: u8, p0: u32) {
        let bound = (self.range >> PROB_BITS) * p0;
        if bit == 0 {
            self.range = bound;
        } else {
            self.low += bound as u64;
            self.range -= bound;
        }
        while self.range < TOP {
            self.range <<= 8;
            self.shift_low();
        }
    }

    /// Codes `bit` under adaptive context `context`.
    #[inline]
    pub fn encode_bit(&mut self, bit: u8, context: usize) {
        let (c0, c1) = self.counts.get(context);
        self.encode_with(bit, prob_zero(c0, c1));
        self.counts.update(context, bit);
    }

    /// Codes `bit` at probability one half without touching any context.
    pub fn encode_bypass(&mut self, bit: u8) {
        self.encode_with(bit, 1 << (PROB_BITS - 1));
    }

    /// The low `bits` bits of `value`, most significant first, at one bit each.
    pub fn encode_raw(&mut self, value: u32, bits: u32) {
        for k in (0..bits).rev() {
            self.encode_bypass(((value >> k) & 1) as u8);
        }
    }

    pub fn finish(mut self) -> Vec<u8> {
        for _ in 0..5 {
            self.shift_low();
        }
        self.out
    }

    /// [`finish`](Self::finish), also returning the final context counts.
    pub fn finish_with_counts(mut self) -> (Vec<u8>, AdaptiveCounts) {
        let counts = std::mem::replace(&mut self.counts, AdaptiveCounts::new(0));
        (self.finish(), counts)
    }
}

pub struct ArithDecoder<'a> {
    data: &'a [u8],
    pos: usize,
    range: u32,
    code: u32,
    counts: AdaptiveCounts,
}

impl<'a> ArithDecoder<'a> {
    pub fn new(data: &'a [u8], contexts: usize) -> Result<Self> {
        let mut dec = Self {
            data,
            pos: 0,
            range: u32::MAX,
            code: 0,
            counts: AdaptiveCounts::new(contexts),
        };
        // the encoder's first byte is always zero
        if dec.next_byte()? != 0 {
            return Err(Error::Corrupt("range coder preamble".into()));
        }
        for _ in 0..4 {
            dec.code = (dec.code << 8) | dec.next_byte()? as u32;
        }
        Ok(dec)
    }

    pub fn counts(&self) -> &AdaptiveCounts {
        &self.counts
    }

    pub fn reset_counts(&mut self) {
        self.counts = AdaptiveCounts::new(self.counts.len());
    }

    #[inline]
    fn next_byte(&mut self) -> Result<u8> {
        let b = *self
            .data
            .get(self.pos)
            .ok_or_else(|| Error::Truncated("arithmetic-coded data ended early".into()))?;
        self.pos += 1;
        Ok(b)
    }

    #[inline]
    fn decode_with(&mut self, p0: u32) -> Result<u8> {
        let bound = (self.range >> PROB_BITS) * p0;
        let bit = if self.code < bound {
            self.range = bound;
            0
        } else {
            self.code -= bound;
            self.range -= bound;
            1
        };
        while self.range < TOP {
            self.range <<= 8;
            self.code = (self.code << 8) | self.next_byte()? as u32;
        }
        Ok(bit)
    }

    #[inline]
    pub fn decode_bit(&mut self, context: usize) -> Result<u8> {
        let (c0, c1) = self.counts.get(context);
        let bit = self.decode_with(prob_zero(c0, c1))?;
        self.counts.update(context, bit);
        Ok(bit)
    }

    pub fn decode_bypass(&mut self) -> Result<u8> {
        self.decode_with(1 << (PROB_BITS - 1))
    }

    pub fn decode_raw(&mut self, bits: u32) -> Result<u32> {
        let mut v = 0;
        for _ in 0..bits {
            v = (v << 1) | self.decode_bypass()? as u32;
        }
        Ok(v)
    }

    /// Bytes consumed so far; after the last bit this equals the encoded
    /// length.
    pub fn consumed(&self) -> usize {
        self.pos
    }

    pub fn into_counts(self) -> AdaptiveCounts {
        self.counts
    }
}

/// Codes signed integers with an adaptive Elias-gamma style code: zigzag
/// map, then the bit length in unary under per-position contexts, then the
/// remaining bits raw. Each field gets its own contexts.
pub struct IntContexts {
    base: usize,
}

/// Unary length positions per integer field.
pub const INT_CONTEXTS: usize = 34;

impl IntContexts {
    pub fn new(base: usize) -> Self {
        Self { base }
    }

    fn zigzag(v: i64) -> u64 {
        ((v << 1) ^ (v >> 63)) as u64
    }

    fn unzigzag(z: u64) -> i64 {
        ((z >> 1) as i64) ^ -((z & 1) as i64)
    }

    pub fn encode(&self, enc: &mut ArithEncoder, v: i64) {
        let z = Self::zigzag(v) + 1;
        let len = 64 - z.leading_zeros();
        for k in 1..len {
            enc.encode_bit(1, self.base + (k as usize).min(INT_CONTEXTS - 1));
        }
        enc.encode_bit(0, self.base + (len as usize).min(INT_CONTEXTS - 1));
        for k in (0..len - 1).rev() {
            enc.encode_bypass(((z >> k) & 1) as u8);
        }
    }

    pub fn decode(&self, dec: &mut ArithDecoder) -> Result<i64> {
        let mut len = 1u32;
        while dec.decode_bit(self.base + (len as usize).min(INT_CONTEXTS - 1))? == 1 {
            len += 1;
            if len > 33 {
                return Err(Error::Corrupt("integer field too long".into()));
            }
        }
        let mut z = 1u64;
        for _ in 0..len - 1 {
            z = (z << 1) | dec.decode_bypass()? as u64;
        }
        Ok(Self::unzigzag(z - 1))
    }
}
