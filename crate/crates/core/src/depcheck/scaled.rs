//! Integer rescaling of probabilities for the inner search loops.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive};

use crate::exactdist::JointDist;

/// Probabilities of `d` as integers over a common denominator.
pub(crate) struct Scaled {
    pub denom: BigInt,
    pub weights: Vec<BigInt>,
}

impl Scaled {
    pub fn new(d: &JointDist) -> Self {
        let denom = d
            .atoms()
            .iter()
            .fold(BigInt::one(), |acc, (_, p)| acc.lcm(p.denom()));
        let weights = d
            .atoms()
            .iter()
            .map(|(_, p)| p.numer() * (&denom / p.denom()))
            .collect();
        Scaled { denom, weights }
    }
}

/// Integer types the searches run in: `i128` when magnitudes allow, `BigInt` otherwise.
pub(crate) trait ExactInt: Clone + Ord + Signed + std::fmt::Debug {
    fn from_big(b: &BigInt) -> Option<Self>;
}

impl ExactInt for i128 {
    fn from_big(b: &BigInt) -> Option<Self> {
        b.to_i128()
    }
}

impl ExactInt for BigInt {
    fn from_big(b: &BigInt) -> Option<Self> {
        Some(b.clone())
    }
}

/// True when every value up to `bound` fits comfortably in an `i128`.
pub(crate) fn fits_i128(bound: &BigInt) -> bool {
    bound.bits() <= 124
}
