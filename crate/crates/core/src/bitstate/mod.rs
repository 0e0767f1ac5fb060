//! Packed binary vectors and the seeded random streams every kernel draws from.

mod bitvec;
mod rng;

pub use bitvec::{BitError, BitVector};
pub(crate) use bitvec::check_probability;
pub use rng::RngStream;

/// Bitwise xor; errors on mismatched dimensions.
pub fn xor(a: &BitVector, b: &BitVector) -> Result<BitVector, BitError> {
    a.xor(b)
}

pub fn hamming(a: &BitVector, b: &BitVector) -> Result<usize, BitError> {
    a.hamming(b)
}

pub fn popcount(v: &BitVector) -> usize {
    v.popcount()
}

pub fn mutate(x: &BitVector, p_flip: f64, rng: &mut RngStream) -> Result<BitVector, BitError> {
    x.mutate(p_flip, rng)
}

pub fn bernoulli_vector(dim: usize, theta: f64, rng: &mut RngStream) -> Result<BitVector, BitError> {
    BitVector::bernoulli(dim, theta, rng)
}
