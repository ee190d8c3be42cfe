//! Publisher side. Nothing here holds a Paillier secret key: every value is
//! computed from the querier's ciphertexts with `add` and `scalar_mul`.

use num_bigint::{BigInt, BigUint};
use rand::{CryptoRng, RngCore};

use crate::abe::{self, AccessTree};
use crate::geo::Location;
use crate::paillier::Ciphertext;

use super::{
    sample_blinds, BlindPair, DisclosureFunction, DistanceRequest, Level, NestedResponse, ProtocolError,
    MAX_GRID_DIST_SQ, MAX_TAU_SQ,
};

/// Where the compared threshold comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThresholdSource {
    /// Level 1: the publisher's own τ², encrypted fresh.
    Publisher(u128),
    /// Level 2: the querier's `E(τ²)` carried in the request.
    Request,
}

const MIN_COMPARE_BITS: u32 = 1024;

fn check_dim(req: &DistanceRequest, location: &Location) -> Result<(), ProtocolError> {
    if req.dim() != location.dim() {
        return Err(ProtocolError::DimensionMismatch(req.dim(), location.dim()));
    }
    Ok(())
}

/// `E(|x - y|²) = E(Σy²) · E(1)^{Σx²} · Π E(-2y_i)^{x_i}`.
///
/// Every exponent is a publisher coordinate or its squared norm, so the
/// cost is a handful of short exponentiations.
pub fn homomorphic_distance_sq(req: &DistanceRequest, location: &Location) -> Result<Ciphertext, ProtocolError> {
    check_dim(req, location)?;
    let pk = &req.pk;
    let mut acc = pk.add(&req.sum_sq, &pk.scalar_mul(&req.one, &BigInt::from(location.norm_sq()))?)?;
    for (ct, &x) in req.neg_two_y.iter().zip(location.coords()) {
        if x != 0 {
            acc = pk.add(&acc, &pk.scalar_mul(ct, &BigInt::from(x))?)?;
        }
    }
    Ok(acc)
}

/// `(E(δ·dist² + δ'), E(δ·τ² + δ'))` under the querier's key.
pub fn blinded_comparison<R: RngCore + CryptoRng>(
    req: &DistanceRequest,
    location: &Location,
    source: ThresholdSource,
    blinds: &BlindPair,
    rng: &mut R,
) -> Result<(Ciphertext, Ciphertext), ProtocolError> {
    let pk = &req.pk;
    let level = match source {
        ThresholdSource::Publisher(_) => Level::PublisherThreshold,
        ThresholdSource::Request => Level::QuerierThreshold,
    };
    if pk.bits() < MIN_COMPARE_BITS {
        return Err(ProtocolError::KeyTooSmall { bits: pk.bits(), level });
    }
    let delta = BigInt::from(blinds.delta().clone());
    let dist = homomorphic_distance_sq(req, location)?;
    let blinded_dist = pk.add(&pk.scalar_mul(&dist, &delta)?, &pk.encrypt(blinds.delta_prime(), rng)?)?;
    let blinded_tau = match (source, &req.tau_sq) {
        (ThresholdSource::Publisher(tau_sq), None) => {
            if tau_sq > MAX_TAU_SQ {
                return Err(ProtocolError::TauOutOfRange(tau_sq));
            }
            pk.encrypt(&blinds.apply(&BigUint::from(tau_sq)), rng)?
        }
        (ThresholdSource::Request, Some(tau_ct)) => {
            pk.add(&pk.scalar_mul(tau_ct, &delta)?, &pk.encrypt(blinds.delta_prime(), rng)?)?
        }
        (ThresholdSource::Publisher(_), Some(_)) => {
            return Err(ProtocolError::ThresholdSource {
                level,
                expected: "only the publisher threshold",
                got: "both thresholds",
            })
        }
        (ThresholdSource::Request, None) => {
            return Err(ProtocolError::ThresholdSource {
                level,
                expected: "E(tau^2) in the request",
                got: "no threshold",
            })
        }
    };
    Ok((blinded_dist, blinded_tau))
}

fn wrap<R: RngCore + CryptoRng>(
    abe_pk: &abe::PublicKey,
    tree: &AccessTree,
    payloads: impl IntoIterator<Item = Vec<u8>>,
    rng: &mut R,
) -> Result<Vec<abe::Ciphertext>, ProtocolError> {
    payloads
        .into_iter()
        .map(|p| abe::encrypt(abe_pk, &p, tree, rng).map_err(ProtocolError::from))
        .collect()
}

/// Level 3: the squared distance, rerandomized and wrapped under `tree`.
pub fn p_respond_distance<R: RngCore + CryptoRng>(
    req: &DistanceRequest,
    location: &Location,
    tree: &AccessTree,
    abe_pk: &abe::PublicKey,
    rng: &mut R,
) -> Result<NestedResponse, ProtocolError> {
    if req.has_tau() {
        return Err(ProtocolError::TauAtWrongLevel);
    }
    if req.pk.n() <= &BigUint::from(MAX_GRID_DIST_SQ) {
        return Err(ProtocolError::KeyTooSmall {
            bits: req.pk.bits(),
            level: Level::Distance,
        });
    }
    let dist = homomorphic_distance_sq(req, location)?;
    // The querier knows its own encryption nonces; fresh noise hides which
    // combination of them the publisher used.
    let dist = req.pk.rerandomize(&dist, rng)?;
    Ok(NestedResponse {
        level: Level::Distance,
        dim: location.dim(),
        parts: wrap(abe_pk, tree, [dist.to_bytes()], rng)?,
    })
}

/// Levels 1 and 2: a fresh blinding pair per response. `tau_publisher` must
/// be given exactly when the request carries no `E(τ²)`.
pub fn p_respond_compare<R: RngCore + CryptoRng>(
    req: &DistanceRequest,
    location: &Location,
    tree: &AccessTree,
    abe_pk: &abe::PublicKey,
    tau_publisher: Option<u64>,
    rng: &mut R,
) -> Result<NestedResponse, ProtocolError> {
    let (source, level) = match (tau_publisher, req.has_tau()) {
        (Some(tau), false) => (
            ThresholdSource::Publisher(u128::from(tau) * u128::from(tau)),
            Level::PublisherThreshold,
        ),
        (None, true) => (ThresholdSource::Request, Level::QuerierThreshold),
        (Some(_), true) => {
            return Err(ProtocolError::ThresholdSource {
                level: Level::QuerierThreshold,
                expected: "exactly one threshold",
                got: "both thresholds",
            })
        }
        (None, false) => {
            return Err(ProtocolError::ThresholdSource {
                level: Level::PublisherThreshold,
                expected: "exactly one threshold",
                got: "no threshold",
            })
        }
    };
    let blinds = sample_blinds(rng);
    let (d, t) = blinded_comparison(req, location, source, &blinds, rng)?;
    Ok(NestedResponse {
        level,
        dim: location.dim(),
        parts: wrap(abe_pk, tree, [d.to_bytes(), t.to_bytes()], rng)?,
    })
}

/// Level 4: each coordinate of `F(x)` wrapped separately.
pub fn p_respond_level4<R: RngCore + CryptoRng>(
    location: &Location,
    tree: &AccessTree,
    abe_pk: &abe::PublicKey,
    disclosure: DisclosureFunction,
    rng: &mut R,
) -> Result<NestedResponse, ProtocolError> {
    let disclosed = disclosure.apply(location);
    let payloads = disclosed.coords().iter().map(|c| c.to_be_bytes().to_vec());
    Ok(NestedResponse {
        level: Level::Location,
        dim: location.dim(),
        parts: wrap(abe_pk, tree, payloads, rng)?,
    })
}

/// Dispatches on `level`. `tau` is the publisher's level-1 threshold and
/// is ignored at other levels.
#[allow(clippy::too_many_arguments)]
pub fn p_respond<R: RngCore + CryptoRng>(
    level: Level,
    req: Option<&DistanceRequest>,
    location: &Location,
    tree: &AccessTree,
    abe_pk: &abe::PublicKey,
    tau: Option<u64>,
    disclosure: DisclosureFunction,
    rng: &mut R,
) -> Result<NestedResponse, ProtocolError> {
    let need_req = || {
        req.ok_or(ProtocolError::ComponentCount {
            expected: location.dim() + 2,
            got: 0,
        })
    };
    match level {
        Level::Location => p_respond_level4(location, tree, abe_pk, disclosure, rng),
        Level::Distance => p_respond_distance(need_req()?, location, tree, abe_pk, rng),
        Level::PublisherThreshold => {
            let tau = tau.ok_or(ProtocolError::ThresholdSource {
                level,
                expected: "a publisher threshold",
                got: "no threshold",
            })?;
            p_respond_compare(need_req()?, location, tree, abe_pk, Some(tau), rng)
        }
        Level::QuerierThreshold => p_respond_compare(need_req()?, location, tree, abe_pk, None, rng),
    }
}
