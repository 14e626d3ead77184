//! Fixed-length bit strings used as family seeds. Bit 0 is the least
//! significant bit of word 0; hex encodings read the seed as one big integer.

use std::fmt;

use rand::Rng;

use crate::error::{Error, Result};

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct SeedBits {
    len: usize,
    words: Vec<u64>,
}

impl SeedBits {
    pub fn zeros(len: usize) -> Self {
        Self {
            len,
            words: vec![0; len.div_ceil(64)],
        }
    }

    /// `len <= 64` bits taken from the low end of `value`.
    pub fn from_u64(value: u64, len: usize) -> Self {
        let mut s = Self::zeros(len);
        s.set_u64(value);
        s
    }

    /// Overwrites a seed of at most 64 bits in place.
    #[inline]
    pub fn set_u64(&mut self, value: u64) {
        assert!(self.len <= 64, "set_u64 on a {}-bit seed", self.len);
        if self.len > 0 {
            self.words[0] = value & low_mask(self.len);
        }
    }

    pub fn from_words(mut words: Vec<u64>, len: usize) -> Self {
        words.resize(len.div_ceil(64), 0);
        let mut s = Self { len, words };
        s.clear_tail();
        s
    }

    pub fn random<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Self {
        let words = (0..len.div_ceil(64)).map(|_| rng.gen()).collect();
        Self::from_words(words, len)
    }

    fn clear_tail(&mut self) {
        if !self.len.is_multiple_of(64) {
            if let Some(last) = self.words.last_mut() {
                *last &= low_mask(self.len % 64);
            }
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn bit(&self, i: usize) -> bool {
        assert!(i < self.len);
        (self.words[i / 64] >> (i % 64)) & 1 == 1
    }

    pub fn set_bit(&mut self, i: usize, value: bool) {
        assert!(i < self.len);
        if value {
            self.words[i / 64] |= 1 << (i % 64);
        } else {
            self.words[i / 64] &= !(1 << (i % 64));
        }
    }

    pub fn flip(&mut self, i: usize) {
        assert!(i < self.len);
        self.words[i / 64] ^= 1 << (i % 64);
    }

    /// Reads `width <= 64` bits starting at `offset` as an integer.
    #[inline]
    pub fn read(&self, offset: usize, width: usize) -> u64 {
        debug_assert!(width <= 64 && offset + width <= self.len);
        if width == 0 {
            return 0;
        }
        let (w, b) = (offset / 64, offset % 64);
        let mut v = self.words[w] >> b;
        if b + width > 64 {
            v |= self.words[w + 1] << (64 - b);
        }
        v & low_mask(width)
    }

    pub fn write(&mut self, offset: usize, width: usize, value: u64) {
        assert!(width <= 64 && offset + width <= self.len);
        for i in 0..width {
            self.set_bit(offset + i, (value >> i) & 1 == 1);
        }
    }

    pub fn slice(&self, offset: usize, width: usize) -> SeedBits {
        assert!(offset + width <= self.len);
        let mut out = SeedBits::zeros(width);
        let mut done = 0;
        while done < width {
            let chunk = (width - done).min(64);
            let v = self.read(offset + done, chunk);
            out.write(done, chunk, v);
            done += chunk;
        }
        out
    }

    /// Concatenation with `parts[0]` in the lowest bits.
    pub fn concat(parts: &[&SeedBits]) -> SeedBits {
        let len = parts.iter().map(|p| p.len).sum();
        let mut out = SeedBits::zeros(len);
        let mut offset = 0;
        for p in parts {
            let mut done = 0;
            while done < p.len {
                let chunk = (p.len - done).min(64);
                out.write(offset + done, chunk, p.read(done, chunk));
                done += chunk;
            }
            offset += p.len;
        }
        out
    }

    /// Parses `0x…` (or bare) hex as a big-endian integer into `len` bits.
    pub fn from_hex(s: &str, len: usize) -> Result<SeedBits> {
        let digits = s
            .trim()
            .strip_prefix("0x")
            .or_else(|| s.trim().strip_prefix("0X"))
            .unwrap_or(s.trim());
        let digits: String = digits.chars().filter(|&c| c != '_').collect();
        if digits.is_empty() {
            return Err(Error::SeedFormat("empty hex string".into()));
        }
        let mut out = SeedBits::zeros(len);
        for (i, ch) in digits.chars().rev().enumerate() {
            let nibble = ch
                .to_digit(16)
                .ok_or_else(|| Error::SeedFormat(format!("bad hex digit {ch:?}")))?
                as u64;
            for b in 0..4 {
                if (nibble >> b) & 1 == 1 {
                    let pos = 4 * i + b;
                    if pos >= len {
                        return Err(Error::SeedFormat(format!(
                            "hex value does not fit in {len} bits"
                        )));
                    }
                    out.set_bit(pos, true);
                }
            }
        }
        Ok(out)
    }

    /// Fixed-width hex (`ceil(len/4)` digits, at least one).
    pub fn to_hex(&self) -> String {
        let digits = self.len.div_ceil(4).max(1);
        let mut s = String::with_capacity(digits + 2);
        s.push_str("0x");
        for i in (0..digits).rev() {
            let lo = 4 * i;
            let width = (self.len.saturating_sub(lo)).min(4);
            let v = if width == 0 { 0 } else { self.read(lo, width) };
            s.push(char::from_digit(v as u32, 16).unwrap());
        }
        s
    }
}

impl fmt::Debug for SeedBits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SeedBits({}b {})", self.len, self.to_hex())
    }
}

#[inline]
pub(crate) fn low_mask(width: usize) -> u64 {
    if width >= 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    }
}
