//! Fixed-length selection bitstrings.
//!
//! Asset `i` of an `n`-asset universe is stored in bit `n - 1 - i`, so the
//! printed form `x_0 x_1 ... x_{n-1}` reads most-significant bit first and
//! lexicographic order on strings coincides with integer order.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub const MAX_BITS: usize = 64;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BitsError {
    #[error("bitstring length {0} exceeds {MAX_BITS}")]
    TooLong(usize),
    #[error("invalid bitstring character {0:?}")]
    BadChar(char),
    #[error("asset index {index} out of range for {len} assets")]
    OutOfRange { index: usize, len: usize },
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitString {
    // `len` first so that derived ordering compares equal-length strings by value.
    len: u8,
    bits: u64,
}

impl BitString {
    pub fn zeros(len: usize) -> Result<Self, BitsError> {
        if len > MAX_BITS {
            return Err(BitsError::TooLong(len));
        }
        Ok(Self { len: len as u8, bits: 0 })
    }

    /// Builds from the raw integer encoding (asset 0 is the most significant bit).
    pub fn from_raw(len: usize, bits: u64) -> Result<Self, BitsError> {
        let mut s = Self::zeros(len)?;
        s.bits = bits & mask(len);
        Ok(s)
    }

    pub fn from_indices(len: usize, indices: &[usize]) -> Result<Self, BitsError> {
        let mut s = Self::zeros(len)?;
        for &i in indices {
            if i >= len {
                return Err(BitsError::OutOfRange { index: i, len });
            }
            s.set(i, true);
        }
        Ok(s)
    }

    pub fn from_bools(values: &[bool]) -> Result<Self, BitsError> {
        let mut s = Self::zeros(values.len())?;
        for (i, &v) in values.iter().enumerate() {
            s.set(i, v);
        }
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn raw(&self) -> u64 {
        self.bits
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.len());
        (self.bits >> (self.len() - 1 - i)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, value: bool) {
        debug_assert!(i < self.len());
        let b = 1u64 << (self.len() - 1 - i);
        if value {
            self.bits |= b;
        } else {
            self.bits &= !b;
        }
    }

    pub fn flip(&mut self, i: usize) {
        self.set(i, !self.get(i));
    }

    pub fn count_ones(&self) -> usize {
        self.bits.count_ones() as usize
    }

    /// Indices of selected assets, ascending.
    pub fn indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.get(i)).collect()
    }

    /// 0/1 values as floats, one per asset.
    pub fn to_f64(&self) -> Vec<f64> {
        (0..self.len()).map(|i| if self.get(i) { 1.0 } else { 0.0 }).collect()
    }
}

fn mask(len: usize) -> u64 {
    if len == 64 {
        u64::MAX
    } else {
        (1u64 << len) - 1
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.len() {
            f.write_str(if self.get(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitString({self})")
    }
}

impl FromStr for BitString {
    type Err = BitsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let values = s
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(BitsError::BadChar(other)),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_bools(&values)
    }
}

impl Serialize for BitString {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BitString {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Binomial coefficient, saturating at `u64::MAX`.
pub fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    acc as u64
}

/// All length-`n` strings with exactly `k` ones, in ascending order.
pub fn fixed_weight(n: usize, k: usize) -> FixedWeight {
    let next = if k > n || n > MAX_BITS { None } else { Some((1u128 << k) - 1) };
    FixedWeight { n, next }
}

#[derive(Debug, Clone)]
pub struct FixedWeight {
    n: usize,
    next: Option<u128>,
}

impl Iterator for FixedWeight {
    type Item = BitString;

    fn next(&mut self) -> Option<BitString> {
        let v = self.next?;
        if v >> self.n != 0 {
            self.next = None;
            return None;
        }
        // Gosper's hack: next larger integer with the same popcount.
        self.next = if v == 0 {
            None
        } else {
            let t = v | (v - 1);
            Some((t + 1) | (((!t & (t + 1)) - 1) >> (v.trailing_zeros() + 1)))
        };
        Some(BitString { len: self.n as u8, bits: v as u64 })
    }
}
