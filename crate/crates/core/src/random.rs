//! Deterministic random streams and exact weighted selection.
//!
//! All randomness comes from ChaCha20 seeded with a 64-bit seed through
//! `SeedableRng::seed_from_u64`; independent streams of the same seed are
//! selected with `set_stream`. Weighted selection never touches floating
//! point: weights are scaled to integers, a uniform integer below their sum
//! is drawn by rejection on whole random bytes, and the index is found on the
//! cumulative sums.

use num_bigint::BigUint;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

pub type TraceRng = ChaCha20Rng;

/// Seed used when the caller does not supply one.
pub const DEFAULT_SEED: u64 = 0x5EED_7124_CE00_0001;

pub fn rng_from_seed(seed: u64) -> TraceRng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Stream `stream` of `seed`; distinct streams never overlap.
pub fn rng_for_stream(seed: u64, stream: u64) -> TraceRng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ChoiceError {
    #[error("cannot choose from weights that sum to zero")]
    AllZero,
    #[error("weights must be nonnegative")]
    Negative,
}

/// Uniform integer in `[0, bound)`; `bound` must be positive.
pub fn uniform_below<R: RngCore + ?Sized>(bound: &BigUint, rng: &mut R) -> BigUint {
    debug_assert!(!bound.is_zero());
    if let Some(b) = bound.to_u64() {
        return BigUint::from(uniform_below_u64(b, rng));
    }
    let bits = bound.bits() as usize;
    let nbytes = bits.div_ceil(8);
    let top_mask = if bits % 8 == 0 { 0xff } else { (1u8 << (bits % 8)) - 1 };
    let mut buf = vec![0u8; nbytes];
    loop {
        rng.fill_bytes(&mut buf);
        buf[nbytes - 1] &= top_mask;
        let candidate = BigUint::from_bytes_le(&buf);
        if &candidate < bound {
            return candidate;
        }
    }
}

fn uniform_below_u64<R: RngCore + ?Sized>(bound: u64, rng: &mut R) -> u64 {
    if bound == 1 {
        return 0;
    }
    let bits = 64 - (bound - 1).leading_zeros();
    let mask = if bits == 64 { u64::MAX } else { (1u64 << bits) - 1 };
    loop {
        let candidate = rng.next_u64() & mask;
        if candidate < bound {
            return candidate;
        }
    }
}

/// Running sums of integer weights, ready for repeated draws.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cumulative {
    sums: Vec<BigUint>,
}

impl Cumulative {
    pub fn new<'a>(weights: impl IntoIterator<Item = &'a BigUint>) -> Self {
        let mut acc = BigUint::zero();
        let sums = weights
            .into_iter()
            .map(|w| {
                acc += w;
                acc.clone()
            })
            .collect();
        Cumulative { sums }
    }

    pub fn total(&self) -> BigUint {
        self.sums.last().cloned().unwrap_or_default()
    }

    pub fn weight(&self, index: usize) -> BigUint {
        match index {
            0 => self.sums[0].clone(),
            i => &self.sums[i] - &self.sums[i - 1],
        }
    }

    pub fn len(&self) -> usize {
        self.sums.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sums.is_empty()
    }

    pub fn draw<R: RngCore + ?Sized>(&self, rng: &mut R) -> Result<usize, ChoiceError> {
        let total = match self.sums.last() {
            Some(t) if !t.is_zero() => t,
            _ => return Err(ChoiceError::AllZero),
        };
        let r = uniform_below(total, rng);
        // first index whose running sum exceeds r
        Ok(self.sums.partition_point(|s| s <= &r))
    }
}

/// Index drawn with probability exactly `w_i / Σw` for integer weights.
pub fn weighted_index<R: RngCore + ?Sized>(weights: &[BigUint], rng: &mut R) -> Result<usize, ChoiceError> {
    Cumulative::new(weights).draw(rng)
}

/// Scales rational weights to integers by the least common multiple of
/// their denominators.
pub fn integer_weights(weights: &[BigRational]) -> Result<Vec<BigUint>, ChoiceError> {
    scale_to_integers(weights).map(|(ints, _)| ints)
}

/// Integer weights together with the common denominator used.
pub fn scale_to_integers(weights: &[BigRational]) -> Result<(Vec<BigUint>, BigUint), ChoiceError> {
    if weights.iter().any(|w| w.is_negative()) {
        return Err(ChoiceError::Negative);
    }
    let lcm = weights
        .iter()
        .fold(num_bigint::BigInt::one(), |acc, w| acc.lcm(w.denom()));
    let ints = weights
        .iter()
        .map(|w| {
            (w.numer() * (&lcm / w.denom()))
                .to_biguint()
                .expect("nonnegative")
        })
        .collect();
    Ok((ints, lcm.to_biguint().expect("positive")))
}

/// Index drawn with probability exactly `w_i / Σw`.
pub fn weighted_choice<R: RngCore + ?Sized>(weights: &[BigRational], rng: &mut R) -> Result<usize, ChoiceError> {
    let ints = integer_weights(weights)?;
    weighted_index(&ints, rng)
}

pub fn fair_bit<R: RngCore + ?Sized>(rng: &mut R) -> bool {
    rng.gen::<bool>()
}
