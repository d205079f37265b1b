//! Points of the Boolean hypercube `{0,1}^n` and the Hamming metric.
//!
//! Bits are addressed 1-based (`1..=n`) in the public API. The text form is a
//! `0`/`1` string with bit 1 leftmost.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

const WORD: usize = 64;

/// A point of `{0,1}^n`, packed into 64-bit words.
///
/// Bits past `n` in the last word are always zero, so derived equality and
/// hashing are word-wise.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitVector {
    n: usize,
    words: Vec<u64>,
}

impl BitVector {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            words: vec![0; n.div_ceil(WORD)],
        }
    }

    pub fn ones(n: usize) -> Self {
        let mut v = Self {
            n,
            words: vec![u64::MAX; n.div_ceil(WORD)],
        };
        v.clear_tail();
        v
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        let mut v = Self::zeros(bits.len());
        for (k, &b) in bits.iter().enumerate() {
            if b {
                v.words[k / WORD] |= 1 << (k % WORD);
            }
        }
        v
    }

    /// Uniformly random point.
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let mut v = Self {
            n,
            words: (0..n.div_ceil(WORD)).map(|_| rng.random()).collect(),
        };
        v.clear_tail();
        v
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Bit `i`, 1-based.
    pub fn get(&self, i: usize) -> Result<bool> {
        self.check_index(i)?;
        Ok(self.bit(i - 1))
    }

    pub fn set(&mut self, i: usize, value: bool) -> Result<()> {
        self.check_index(i)?;
        self.put(i - 1, value);
        Ok(())
    }

    /// Copy of `self` with bit `i` (1-based) complemented.
    pub fn flip(&self, i: usize) -> Result<Self> {
        self.check_index(i)?;
        let mut out = self.clone();
        out.toggle(i - 1);
        Ok(out)
    }

    /// Complements bit `i` (1-based) in place.
    pub fn flip_in_place(&mut self, i: usize) -> Result<()> {
        self.check_index(i)?;
        self.toggle(i - 1);
        Ok(())
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn complement(&self) -> Self {
        let mut v = Self {
            n: self.n,
            words: self.words.iter().map(|w| !w).collect(),
        };
        v.clear_tail();
        v
    }

    pub fn hamming_distance(&self, other: &Self) -> Result<usize> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: other.n,
            });
        }
        Ok(self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a ^ b).count_ones() as usize)
            .sum())
    }

    /// The radius-1 Hamming ball: `self` first, then the flip of bit 1, 2, ..., n.
    pub fn hamming1_neighborhood(&self) -> Vec<Self> {
        std::iter::once(self.clone()).chain(self.flips()).collect()
    }

    /// The `n` points at distance exactly 1, in bit order.
    pub fn flips(&self) -> impl Iterator<Item = Self> + '_ {
        (0..self.n).map(move |k| {
            let mut v = self.clone();
            v.toggle(k);
            v
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.n).map(move |k| self.bit(k))
    }

    pub fn to_bools(&self) -> Vec<bool> {
        self.iter().collect()
    }

    /// Every point of `{0,1}^n`, ordered by the integer whose most significant
    /// bit is bit 1. Only sensible for small `n`.
    pub fn enumerate(n: usize) -> impl Iterator<Item = Self> {
        assert!(n < 64, "exhaustive enumeration is limited to n < 64");
        (0..1u64 << n).map(move |code| {
            let mut v = Self::zeros(n);
            for k in 0..n {
                if code >> (n - 1 - k) & 1 == 1 {
                    v.put(k, true);
                }
            }
            v
        })
    }

    // 0-based accessors used on hot paths where the index is known valid.

    #[inline]
    pub(crate) fn bit(&self, k: usize) -> bool {
        self.words[k / WORD] >> (k % WORD) & 1 == 1
    }

    #[inline]
    pub(crate) fn put(&mut self, k: usize, value: bool) {
        let mask = 1u64 << (k % WORD);
        if value {
            self.words[k / WORD] |= mask;
        } else {
            self.words[k / WORD] &= !mask;
        }
    }

    #[inline]
    pub(crate) fn toggle(&mut self, k: usize) {
        self.words[k / WORD] ^= 1 << (k % WORD);
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i == 0 || i > self.n {
            return Err(Error::IndexOutOfRange { index: i, n: self.n });
        }
        Ok(())
    }

    fn clear_tail(&mut self) {
        let rem = self.n % WORD;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }
}

impl fmt::Display for BitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: String = self.iter().map(|b| if b { '1' } else { '0' }).collect();
        f.write_str(&s)
    }
}

impl fmt::Debug for BitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitVector({self})")
    }
}

impl FromStr for BitVector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let mut v = Self::zeros(s.len());
        for (k, c) in s.chars().enumerate() {
            match c {
                '0' => {}
                '1' => v.put(k, true),
                other => {
                    return Err(Error::InvalidArgument(format!(
                        "bit string contains {other:?} at position {}",
                        k + 1
                    )))
                }
            }
        }
        Ok(v)
    }
}

impl Serialize for BitVector {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BitVector {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
