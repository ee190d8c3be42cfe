use num_bigint::{BigUint, RandBigInt};
use num_traits::{One, Zero};
use rand::{CryptoRng, RngCore};

use super::ProtocolError;

/// `δ < 2^970`, so `δ · 2^52 + δ' < 2^1023` never wraps a 1024-bit modulus.
pub const DELTA_BITS: u64 = 970;
pub const DELTA_PRIME_BITS: u64 = 1022;

/// Order-preserving mask `v -> δ·v + δ'` applied to both sides of a
/// comparison.
#[derive(Clone, PartialEq, Eq)]
pub struct BlindPair {
    delta: BigUint,
    delta_prime: BigUint,
}

impl std::fmt::Debug for BlindPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("BlindPair(..)")
    }
}

impl BlindPair {
    pub fn new(delta: BigUint, delta_prime: BigUint) -> Result<Self, ProtocolError> {
        if delta.is_zero() || delta.bits() > DELTA_BITS {
            return Err(ProtocolError::BlindOutOfRange("delta must lie in [1, 2^970)"));
        }
        if delta_prime.is_zero() || delta_prime.bits() > DELTA_PRIME_BITS {
            return Err(ProtocolError::BlindOutOfRange("delta' must lie in [1, 2^1022)"));
        }
        Ok(BlindPair { delta, delta_prime })
    }

    pub fn delta(&self) -> &BigUint {
        &self.delta
    }

    pub fn delta_prime(&self) -> &BigUint {
        &self.delta_prime
    }

    /// `δ·v + δ'` over the integers.
    pub fn apply(&self, v: &BigUint) -> BigUint {
        &self.delta * v + &self.delta_prime
    }
}

/// Draws a fresh blinding pair; call once per response.
pub fn sample_blinds<R: RngCore + CryptoRng>(rng: &mut R) -> BlindPair {
    let one = BigUint::one();
    BlindPair {
        delta: rng.gen_biguint_range(&one, &(BigUint::one() << DELTA_BITS)),
        delta_prime: rng.gen_biguint_range(&one, &(BigUint::one() << DELTA_PRIME_BITS)),
    }
}
