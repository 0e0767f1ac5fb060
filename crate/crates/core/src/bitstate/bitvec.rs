use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use super::RngStream;

const WORD_BITS: usize = 64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BitError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("{name} must lie in [0, 1], got {value}")]
    InvalidProbability { name: &'static str, value: f64 },
    #[error("bit vectors must have at least one bit")]
    ZeroDimension,
    #[error("invalid character {0:?} in bit string")]
    InvalidChar(char),
}

pub(crate) fn check_probability(name: &'static str, value: f64) -> Result<(), BitError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(BitError::InvalidProbability { name, value })
    }
}

/// Fixed-dimension binary vector packed into 64-bit words.
///
/// Bit `l` lives in word `l / 64` at position `l % 64`. Bits at positions
/// `>= dim` in the final word are always zero.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitVector {
    dim: usize,
    words: Vec<u64>,
}

#[inline]
fn word_count(dim: usize) -> usize {
    dim.div_ceil(WORD_BITS)
}

impl BitVector {
    /// All-zeros vector. Panics when `dim == 0`.
    pub fn zeros(dim: usize) -> Self {
        assert!(dim > 0, "bit vectors must have at least one bit");
        Self {
            dim,
            words: vec![0; word_count(dim)],
        }
    }

    pub fn ones(dim: usize) -> Self {
        let mut v = Self::zeros(dim);
        v.words.iter_mut().for_each(|w| *w = u64::MAX);
        v.mask_tail();
        v
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        let mut v = Self::zeros(bits.len());
        for (l, &b) in bits.iter().enumerate() {
            if b {
                v.set(l, true);
            }
        }
        v
    }

    /// Vector whose bit `l` is bit `l` of `index`. Requires `dim <= 64`.
    pub fn from_index(index: u64, dim: usize) -> Self {
        assert!(dim <= WORD_BITS, "from_index supports at most 64 bits");
        let mut v = Self::zeros(dim);
        v.words[0] = index;
        v.mask_tail();
        v
    }

    /// Inverse of [`BitVector::from_index`]. Requires `dim <= 64`.
    pub fn to_index(&self) -> u64 {
        assert!(self.dim <= WORD_BITS, "to_index supports at most 64 bits");
        self.words[0]
    }

    pub(crate) fn from_words(dim: usize, words: Vec<u64>) -> Self {
        debug_assert_eq!(words.len(), word_count(dim));
        let mut v = Self { dim, words };
        v.mask_tail();
        v
    }

    #[inline]
    fn mask_tail(&mut self) {
        let rem = self.dim % WORD_BITS;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn words(&self) -> &[u64] {
        &self.words
    }

    #[inline]
    pub fn get(&self, l: usize) -> bool {
        assert!(l < self.dim, "bit {l} out of range for dim {}", self.dim);
        (self.words[l / WORD_BITS] >> (l % WORD_BITS)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, l: usize, value: bool) {
        assert!(l < self.dim, "bit {l} out of range for dim {}", self.dim);
        let mask = 1u64 << (l % WORD_BITS);
        if value {
            self.words[l / WORD_BITS] |= mask;
        } else {
            self.words[l / WORD_BITS] &= !mask;
        }
    }

    #[inline]
    pub fn flip(&mut self, l: usize) {
        assert!(l < self.dim, "bit {l} out of range for dim {}", self.dim);
        self.words[l / WORD_BITS] ^= 1u64 << (l % WORD_BITS);
    }

    pub fn popcount(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    fn check_dim(&self, other: &Self) -> Result<(), BitError> {
        if self.dim == other.dim {
            Ok(())
        } else {
            Err(BitError::DimensionMismatch {
                left: self.dim,
                right: other.dim,
            })
        }
    }

    pub fn xor(&self, other: &Self) -> Result<Self, BitError> {
        self.check_dim(other)?;
        let words = self.words.iter().zip(&other.words).map(|(a, b)| a ^ b).collect();
        Ok(Self { dim: self.dim, words })
    }

    /// In-place xor; dimensions must match.
    pub fn xor_assign(&mut self, other: &Self) -> Result<(), BitError> {
        self.check_dim(other)?;
        self.words.iter_mut().zip(&other.words).for_each(|(a, b)| *a ^= b);
        Ok(())
    }

    pub fn hamming(&self, other: &Self) -> Result<usize, BitError> {
        self.check_dim(other)?;
        Ok(self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a ^ b).count_ones() as usize)
            .sum())
    }

    pub fn complement(&self) -> Self {
        let words = self.words.iter().map(|w| !w).collect();
        Self::from_words(self.dim, words)
    }

    /// Flips each bit independently with probability `p_flip`.
    ///
    /// Exactly one uniform variate is consumed per bit, in index order; bit
    /// `l` flips when `u_l < p_flip`.
    pub fn mutate(&self, p_flip: f64, rng: &mut RngStream) -> Result<Self, BitError> {
        check_probability("p_flip", p_flip)?;
        let mut out = self.clone();
        for l in 0..self.dim {
            if rng.uniform() < p_flip {
                out.flip(l);
            }
        }
        Ok(out)
    }

    /// Vector of i.i.d. Bernoulli(`theta`) bits, one uniform per bit in index order.
    pub fn bernoulli(dim: usize, theta: f64, rng: &mut RngStream) -> Result<Self, BitError> {
        if dim == 0 {
            return Err(BitError::ZeroDimension);
        }
        check_probability("theta", theta)?;
        let mut out = Self::zeros(dim);
        for l in 0..dim {
            if rng.uniform() < theta {
                out.set(l, true);
            }
        }
        Ok(out)
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.dim).map(move |l| self.get(l))
    }

    /// Indices of set bits in increasing order.
    pub fn ones_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut rest = w;
            std::iter::from_fn(move || {
                if rest == 0 {
                    None
                } else {
                    let tz = rest.trailing_zeros() as usize;
                    rest &= rest - 1;
                    Some(wi * WORD_BITS + tz)
                }
            })
        })
    }
}

/// Textual form: one `0`/`1` per bit, position 0 first.
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
    type Err = BitError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(BitError::InvalidChar(other)),
            })
            .collect::<Result<Vec<_>, _>>()?;
        if bits.is_empty() {
            return Err(BitError::ZeroDimension);
        }
        Ok(Self::from_bits(&bits))
    }
}

impl Serialize for BitVector {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BitVector {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
