//! Random prime generation (trial division + Miller-Rabin).

use num_bigint::{BigUint, RandBigInt};
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use rand::{CryptoRng, RngCore};

/// Miller-Rabin rounds; each round has error at most 1/4, so 40 rounds
/// bound the false-positive rate by 2^-80.
pub const MILLER_RABIN_ROUNDS: usize = 40;

const SMALL_PRIMES: [u32; 54] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97,
    101, 103, 107, 109, 113, 127, 131, 137, 139, 149, 151, 157, 163, 167, 173, 179, 181, 191, 193,
    197, 199, 211, 223, 227, 229, 233, 239, 241, 251,
];

/// Probabilistic primality test with error at most 2^-80.
pub fn is_probable_prime<R: RngCore + CryptoRng>(n: &BigUint, rng: &mut R) -> bool {
    let two = BigUint::from(2u8);
    if n < &two {
        return false;
    }
    for &p in SMALL_PRIMES.iter() {
        let p = BigUint::from(p);
        if n == &p {
            return true;
        }
        if (n % &p).is_zero() {
            return false;
        }
    }
    if let Some(small) = n.to_u64() {
        // Everything below 256^2 without a factor under 256 is prime.
        if small < 65_536 {
            return true;
        }
    }

    let n_minus_1 = n - 1u8;
    let s = n_minus_1.trailing_zeros().unwrap_or(0);
    let d = &n_minus_1 >> s;
    let upper = n - 1u8; // exclusive bound for bases in [2, n-2]

    'witness: for _ in 0..MILLER_RABIN_ROUNDS {
        let a = rng.gen_biguint_range(&two, &upper);
        let mut x = a.modpow(&d, n);
        if x.is_one() || x == n_minus_1 {
            continue;
        }
        for _ in 1..s {
            x = x.modpow(&two, n);
            if x == n_minus_1 {
                continue 'witness;
            }
            if x.is_one() {
                return false;
            }
        }
        return false;
    }
    true
}

/// Draws a random prime of exactly `bits` bits whose top two bits are set,
/// so that the product of two such primes has exactly `2 * bits` bits.
pub fn random_prime<R: RngCore + CryptoRng>(bits: u64, rng: &mut R) -> BigUint {
    assert!(bits >= 8, "prime size too small");
    let top = (BigUint::one() << (bits - 1)) | (BigUint::one() << (bits - 2));
    loop {
        let mut candidate = rng.gen_biguint(bits) | &top | BigUint::one();
        // Walk forward over odd numbers that survive the small-prime sieve.
        for _ in 0..(bits * 4) {
            if candidate.bits() != bits {
                break;
            }
            if passes_sieve(&candidate) && is_probable_prime(&candidate, rng) {
                return candidate;
            }
            candidate += 2u8;
        }
    }
}

fn passes_sieve(n: &BigUint) -> bool {
    SMALL_PRIMES.iter().all(|&p| {
        let p = BigUint::from(p);
        n == &p || !n.is_multiple_of(&p)
    })
}
