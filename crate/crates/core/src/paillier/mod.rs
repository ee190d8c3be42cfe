//! Paillier cryptosystem with `g = n + 1`.
//!
//! Only the two homomorphic operations the query protocols need are
//! exposed: ciphertext addition ([`PublicKey::add`]) and multiplication of
//! the plaintext by a signed scalar ([`PublicKey::scalar_mul`]).
//!
//! Every ciphertext carries the [`KeyId`] of the modulus it was produced
//! under, so mixing ciphertexts of different keys is an error instead of
//! silent garbage.

mod prime;

pub use prime::{is_probable_prime, random_prime, MILLER_RABIN_ROUNDS};

use std::cell::Cell;
use std::fmt;

use num_bigint::{BigInt, BigUint, RandBigInt, Sign};
use num_integer::Integer;
use num_traits::{One, Zero};
use rand::{CryptoRng, RngCore};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::codec::{DecodeError, Reader, Writer};

pub const DEFAULT_KEY_BITS: u32 = 1024;
pub const MIN_KEY_BITS: u32 = 16;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PaillierError {
    #[error("key size must be an even number of bits >= {MIN_KEY_BITS}, got {0}")]
    InvalidKeySize(u32),
    #[error("plaintext is outside [0, n)")]
    PlaintextOutOfRange,
    #[error("nonce must lie in [1, n) and be coprime to n")]
    InvalidNonce,
    #[error("ciphertext was produced under a different key")]
    KeyMismatch,
    #[error("ciphertext is not a unit modulo n^2")]
    NotInGroup,
    #[error("invalid key material: {0}")]
    InvalidKey(String),
    #[error(transparent)]
    Decode(#[from] DecodeError),
}

pub type Result<T> = std::result::Result<T, PaillierError>;

thread_local! {
    static DECRYPTIONS: Cell<u64> = const { Cell::new(0) };
}

/// Number of decryptions performed on the calling thread since it started.
///
/// Used by tests to check that publisher-side code paths never decrypt.
pub fn decryptions_on_this_thread() -> u64 {
    DECRYPTIONS.with(Cell::get)
}

/// Short fingerprint of a modulus `n`.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct KeyId([u8; 8]);

impl KeyId {
    fn of(n: &BigUint) -> Self {
        let digest = Sha256::digest(n.to_bytes_be());
        let mut id = [0u8; 8];
        id.copy_from_slice(&digest[..8]);
        KeyId(id)
    }
}

impl fmt::Debug for KeyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "KeyId(")?;
        for b in self.0 {
            write!(f, "{b:02x}")?;
        }
        write!(f, ")")
    }
}

/// Encryption key `(n, g)`.
#[derive(Clone, PartialEq, Eq)]
pub struct PublicKey {
    n: BigUint,
    n_squared: BigUint,
    g: BigUint,
    bits: u32,
    id: KeyId,
}

impl fmt::Debug for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PublicKey")
            .field("bits", &self.bits)
            .field("id", &self.id)
            .finish()
    }
}

impl PublicKey {
    pub fn from_modulus(n: BigUint) -> Result<Self> {
        let bits = u32::try_from(n.bits()).unwrap_or(u32::MAX);
        if bits < 4 || n.is_even() {
            return Err(PaillierError::InvalidKey("modulus must be odd and at least 15".into()));
        }
        Ok(PublicKey {
            n_squared: &n * &n,
            g: &n + 1u8,
            id: KeyId::of(&n),
            bits,
            n,
        })
    }

    pub fn n(&self) -> &BigUint {
        &self.n
    }

    pub fn g(&self) -> &BigUint {
        &self.g
    }

    pub fn n_squared(&self) -> &BigUint {
        &self.n_squared
    }

    /// Bit length of `n`.
    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn id(&self) -> KeyId {
        self.id
    }

    /// Serialized ciphertext width: `ceil(2 * bits / 8)` bytes.
    pub fn ciphertext_len(&self) -> usize {
        (2 * self.bits as usize).div_ceil(8)
    }

    pub fn encrypt<R: RngCore + CryptoRng>(&self, m: &BigUint, rng: &mut R) -> Result<Ciphertext> {
        let r = self.random_nonce(rng);
        self.encrypt_with_nonce(m, &r)
    }

    /// Encrypts with a caller-chosen nonce `r`. Deterministic; intended for
    /// reproducible vectors, not production use.
    pub fn encrypt_with_nonce(&self, m: &BigUint, r: &BigUint) -> Result<Ciphertext> {
        self.check_plaintext(m)?;
        self.check_nonce(r)?;
        let noise = r.modpow(&self.n, &self.n_squared);
        Ok(self.assemble(m, &noise))
    }

    /// Encrypts a signed value, mapping negatives to `n - |m|`.
    pub fn encrypt_signed<R: RngCore + CryptoRng>(&self, m: &BigInt, rng: &mut R) -> Result<Ciphertext> {
        let reduced = self.reduce(m);
        self.encrypt(&reduced, rng)
    }

    /// Homomorphic addition: decrypts to `(m1 + m2) mod n`.
    pub fn add(&self, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext> {
        self.check_owned(a)?;
        self.check_owned(b)?;
        Ok(self.wrap((&a.value * &b.value) % &self.n_squared))
    }

    /// Homomorphic scalar multiplication: decrypts to `(m * k) mod n`.
    /// Negative `k` is handled as the inverse of `a^|k|`, which keeps the
    /// exponent short for small magnitudes.
    pub fn scalar_mul(&self, a: &Ciphertext, k: &BigInt) -> Result<Ciphertext> {
        self.check_owned(a)?;
        if k.sign() == Sign::Minus && k.magnitude() < &self.n {
            let pos = a.value.modpow(k.magnitude(), &self.n_squared);
            let inv = pos.modinv(&self.n_squared).ok_or(PaillierError::NotInGroup)?;
            return Ok(self.wrap(inv));
        }
        let exponent = self.reduce(k);
        Ok(self.wrap(a.value.modpow(&exponent, &self.n_squared)))
    }

    /// Multiplies by a fresh encryption of zero.
    pub fn rerandomize<R: RngCore + CryptoRng>(&self, a: &Ciphertext, rng: &mut R) -> Result<Ciphertext> {
        self.check_owned(a)?;
        let r = self.random_nonce(rng);
        let noise = r.modpow(&self.n, &self.n_squared);
        Ok(self.wrap((&a.value * noise) % &self.n_squared))
    }

    /// `k mod n` as a non-negative integer.
    pub fn reduce(&self, k: &BigInt) -> BigUint {
        let n = BigInt::from_biguint(Sign::Plus, self.n.clone());
        k.mod_floor(&n)
            .to_biguint()
            .expect("mod_floor with positive modulus is non-negative")
    }

    /// Length-prefixed big-endian `n`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.prefixed(&self.n.to_bytes_be());
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        let key = Self::read(&mut r)?;
        r.finish()?;
        Ok(key)
    }

    pub(crate) fn read(r: &mut Reader<'_>) -> Result<Self> {
        let raw = r.prefixed()?;
        if raw.first() == Some(&0) {
            return Err(DecodeError::invalid("modulus has a leading zero byte").into());
        }
        Self::from_modulus(BigUint::from_bytes_be(raw))
    }

    /// Parses a fixed-width ciphertext and binds it to this key.
    pub fn ciphertext_from_bytes(&self, bytes: &[u8]) -> Result<Ciphertext> {
        if bytes.len() != self.ciphertext_len() {
            return Err(DecodeError::invalid(format!(
                "ciphertext must be {} bytes, got {}",
                self.ciphertext_len(),
                bytes.len()
            ))
            .into());
        }
        let value = BigUint::from_bytes_be(bytes);
        if value >= self.n_squared || !value.gcd(&self.n).is_one() {
            return Err(PaillierError::NotInGroup);
        }
        Ok(self.wrap(value))
    }

    fn assemble(&self, m: &BigUint, noise: &BigUint) -> Ciphertext {
        // g^m = (1 + n)^m = 1 + m*n (mod n^2)
        let gm = (BigUint::one() + m * &self.n) % &self.n_squared;
        self.wrap((gm * noise) % &self.n_squared)
    }

    fn wrap(&self, value: BigUint) -> Ciphertext {
        Ciphertext {
            value,
            key: self.id,
            width: self.ciphertext_len(),
        }
    }

    fn random_nonce<R: RngCore + CryptoRng>(&self, rng: &mut R) -> BigUint {
        loop {
            let r = rng.gen_biguint_range(&BigUint::one(), &self.n);
            if r.gcd(&self.n).is_one() {
                return r;
            }
        }
    }

    fn check_plaintext(&self, m: &BigUint) -> Result<()> {
        if m >= &self.n {
            return Err(PaillierError::PlaintextOutOfRange);
        }
        Ok(())
    }

    fn check_nonce(&self, r: &BigUint) -> Result<()> {
        if r.is_zero() || r >= &self.n || !r.gcd(&self.n).is_one() {
            return Err(PaillierError::InvalidNonce);
        }
        Ok(())
    }

    fn check_owned(&self, ct: &Ciphertext) -> Result<()> {
        if ct.key != self.id {
            return Err(PaillierError::KeyMismatch);
        }
        Ok(())
    }
}

#[derive(Clone)]
struct Crt {
    p_squared: BigUint,
    q_squared: BigUint,
    /// `n mod p(p-1)`, the noise exponent reduced for the `p^2` half.
    n_mod_phi_p2: BigUint,
    n_mod_phi_q2: BigUint,
    /// `(q^2)^-1 mod p^2`
    q2_inv_p2: BigUint,
    /// `L_p(g^(p-1) mod p^2)^-1 mod p`
    hp: BigUint,
    hq: BigUint,
    /// `q^-1 mod p`
    q_inv_p: BigUint,
}

/// Encryption and decryption keys. `DK = (lambda, mu)` plus the prime
/// factors, which also enable CRT-accelerated encryption and decryption.
#[derive(Clone)]
pub struct Keypair {
    public: PublicKey,
    p: BigUint,
    q: BigUint,
    lambda: BigUint,
    mu: BigUint,
    crt: Crt,
}

impl fmt::Debug for Keypair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Keypair")
            .field("public", &self.public)
            .finish_non_exhaustive()
    }
}

impl Keypair {
    /// Generates a key whose modulus has exactly `bits` bits.
    pub fn generate<R: RngCore + CryptoRng>(bits: u32, rng: &mut R) -> Result<Self> {
        if bits < MIN_KEY_BITS || bits % 2 != 0 {
            return Err(PaillierError::InvalidKeySize(bits));
        }
        let half = u64::from(bits / 2);
        loop {
            let p = random_prime(half, rng);
            let q = random_prime(half, rng);
            if p == q {
                continue;
            }
            match Self::from_primes(p, q) {
                Ok(kp) => return Ok(kp),
                Err(PaillierError::InvalidKey(_)) => continue,
                Err(e) => return Err(e),
            }
        }
    }

    /// Builds a keypair from two distinct primes of equal bit length.
    /// Primality is the caller's responsibility.
    pub fn from_primes(p: BigUint, q: BigUint) -> Result<Self> {
        if p == q || p.bits() != q.bits() {
            return Err(PaillierError::InvalidKey(
                "primes must be distinct and of equal bit length".into(),
            ));
        }
        let n = &p * &q;
        let public = PublicKey::from_modulus(n)?;
        let n = public.n();
        let p1 = &p - 1u8;
        let q1 = &q - 1u8;
        let lambda = &p1 * &q1;
        if !lambda.gcd(n).is_one() {
            return Err(PaillierError::InvalidKey("gcd(n, lambda) != 1".into()));
        }
        // mu = (L(g^lambda mod n^2))^-1 mod n, and L(g^lambda) = lambda mod n for g = n + 1.
        let l = l_function(&public.g.modpow(&lambda, &public.n_squared), n);
        let mu = l
            .modinv(n)
            .ok_or_else(|| PaillierError::InvalidKey("lambda not invertible mod n".into()))?;

        let p_squared = &p * &p;
        let q_squared = &q * &q;
        let hp = l_function(&public.g.modpow(&p1, &p_squared), &p)
            .modinv(&p)
            .ok_or_else(|| PaillierError::InvalidKey("h_p not invertible".into()))?;
        let hq = l_function(&public.g.modpow(&q1, &q_squared), &q)
            .modinv(&q)
            .ok_or_else(|| PaillierError::InvalidKey("h_q not invertible".into()))?;
        let crt = Crt {
            n_mod_phi_p2: n % (&p * &p1),
            n_mod_phi_q2: n % (&q * &q1),
            q2_inv_p2: q_squared
                .modinv(&p_squared)
                .ok_or_else(|| PaillierError::InvalidKey("q^2 not invertible mod p^2".into()))?,
            q_inv_p: q
                .modinv(&p)
                .ok_or_else(|| PaillierError::InvalidKey("q not invertible mod p".into()))?,
            p_squared,
            q_squared,
            hp,
            hq,
        };
        Ok(Keypair {
            public,
            p,
            q,
            lambda,
            mu,
            crt,
        })
    }

    pub fn public(&self) -> &PublicKey {
        &self.public
    }

    pub fn p(&self) -> &BigUint {
        &self.p
    }

    pub fn q(&self) -> &BigUint {
        &self.q
    }

    pub fn lambda(&self) -> &BigUint {
        &self.lambda
    }

    pub fn mu(&self) -> &BigUint {
        &self.mu
    }

    /// Same ciphertext distribution as [`PublicKey::encrypt`], computing
    /// `r^n mod n^2` through the factorization.
    pub fn encrypt<R: RngCore + CryptoRng>(&self, m: &BigUint, rng: &mut R) -> Result<Ciphertext> {
        let r = self.public.random_nonce(rng);
        self.encrypt_with_nonce(m, &r)
    }

    pub fn encrypt_with_nonce(&self, m: &BigUint, r: &BigUint) -> Result<Ciphertext> {
        self.public.check_plaintext(m)?;
        self.public.check_nonce(r)?;
        let c = &self.crt;
        let a = r.modpow(&c.n_mod_phi_p2, &c.p_squared);
        let b = r.modpow(&c.n_mod_phi_q2, &c.q_squared);
        let noise = crt_combine(&a, &b, &c.p_squared, &c.q_squared, &c.q2_inv_p2);
        Ok(self.public.assemble(m, &noise))
    }

    pub fn encrypt_signed<R: RngCore + CryptoRng>(&self, m: &BigInt, rng: &mut R) -> Result<Ciphertext> {
        let reduced = self.public.reduce(m);
        self.encrypt(&reduced, rng)
    }

    /// Recovers `L(c^lambda mod n^2) * mu mod n`, evaluated modulo `p^2` and
    /// `q^2` separately and recombined.
    pub fn decrypt(&self, ct: &Ciphertext) -> Result<BigUint> {
        self.public.check_owned(ct)?;
        if ct.value >= self.public.n_squared || !ct.value.gcd(&self.public.n).is_one() {
            return Err(PaillierError::NotInGroup);
        }
        DECRYPTIONS.with(|d| d.set(d.get() + 1));
        let c = &self.crt;
        let mp = (l_function(&ct.value.modpow(&(&self.p - 1u8), &c.p_squared), &self.p) * &c.hp)
            % &self.p;
        let mq = (l_function(&ct.value.modpow(&(&self.q - 1u8), &c.q_squared), &self.q) * &c.hq)
            % &self.q;
        Ok(crt_combine(&mp, &mq, &self.p, &self.q, &c.q_inv_p))
    }

    /// Decrypts and maps the upper half of `[0, n)` to negative values.
    pub fn decrypt_signed(&self, ct: &Ciphertext) -> Result<BigInt> {
        let m = self.decrypt(ct)?;
        let half = self.public.n() >> 1u8;
        if m > half {
            Ok(BigInt::from_biguint(Sign::Plus, m) - BigInt::from_biguint(Sign::Plus, self.public.n.clone()))
        } else {
            Ok(BigInt::from_biguint(Sign::Plus, m))
        }
    }
}

/// `L(a) = (a - 1) / d`
fn l_function(a: &BigUint, d: &BigUint) -> BigUint {
    (a - 1u8) / d
}

/// Solves `x = a mod m1`, `x = b mod m2` given `m2^-1 mod m1`.
fn crt_combine(a: &BigUint, b: &BigUint, m1: &BigUint, m2: &BigUint, m2_inv_m1: &BigUint) -> BigUint {
    let b_mod = b % m1;
    let diff = if a >= &b_mod { a - &b_mod } else { a + m1 - &b_mod };
    let h = (diff * m2_inv_m1) % m1;
    b + h * m2
}

/// An element of `Z*_{n^2}` bound to the key that produced it.
#[derive(Clone, PartialEq, Eq)]
pub struct Ciphertext {
    value: BigUint,
    key: KeyId,
    width: usize,
}

impl fmt::Debug for Ciphertext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Ciphertext")
            .field("key", &self.key)
            .field("bits", &self.value.bits())
            .finish()
    }
}

impl Ciphertext {
    pub fn value(&self) -> &BigUint {
        &self.value
    }

    pub fn key_id(&self) -> KeyId {
        self.key
    }

    /// Big-endian, zero-padded to the key's fixed ciphertext width.
    pub fn to_bytes(&self) -> Vec<u8> {
        let raw = self.value.to_bytes_be();
        let mut out = vec![0u8; self.width.saturating_sub(raw.len())];
        out.extend_from_slice(&raw);
        out
    }
}
