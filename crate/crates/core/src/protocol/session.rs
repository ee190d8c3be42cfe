use std::cmp::Ordering;
use std::fmt;
use std::sync::Arc;

use num_bigint::{BigInt, BigUint};
use num_traits::ToPrimitive;
use rand::{CryptoRng, RngCore};

use crate::abe;
use crate::geo::{Location, SpaceConfig};
use crate::paillier::{Keypair, DEFAULT_KEY_BITS};

use super::{DistanceRequest, Level, NestedResponse, ProtocolError, MAX_TAU_SQ};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SessionState {
    Init,
    RequestSent,
    Responded,
    Done,
    Discarded,
}

/// Where the querier's Paillier keypair comes from.
#[derive(Debug, Clone)]
pub enum KeySource {
    /// A fresh keypair for every session.
    Ephemeral { bits: u32 },
    /// One keypair reused across sessions (faster, but links them).
    Cached(Arc<Keypair>),
}

impl Default for KeySource {
    fn default() -> Self {
        KeySource::Ephemeral {
            bits: DEFAULT_KEY_BITS,
        }
    }
}

impl KeySource {
    fn keypair<R: RngCore + CryptoRng>(&self, rng: &mut R) -> Result<Arc<Keypair>, ProtocolError> {
        match self {
            KeySource::Ephemeral { bits } => Ok(Arc::new(Keypair::generate(*bits, rng)?)),
            KeySource::Cached(kp) => Ok(Arc::clone(kp)),
        }
    }
}

/// Outcome of comparing the distance against the threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Trichotomy {
    Less,
    Equal,
    Greater,
}

impl From<Ordering> for Trichotomy {
    fn from(o: Ordering) -> Self {
        match o {
            Ordering::Less => Trichotomy::Less,
            Ordering::Equal => Trichotomy::Equal,
            Ordering::Greater => Trichotomy::Greater,
        }
    }
}

impl fmt::Display for Trichotomy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Trichotomy::Less => "<",
            Trichotomy::Equal => "=",
            Trichotomy::Greater => ">",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum QueryResult {
    /// Level 4: the disclosed location.
    Location(Location),
    /// Level 3.
    Distance { squared: u128, meters: f64 },
    /// Levels 1–2: distance compared to the threshold.
    Comparison(Trichotomy),
}

/// Querier-side state of one query.
#[derive(Debug)]
pub struct QuerySession {
    level: Level,
    dim: usize,
    keys: Option<Arc<Keypair>>,
    state: SessionState,
}

impl QuerySession {
    pub fn level(&self) -> Level {
        self.level
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn state(&self) -> SessionState {
        self.state
    }

    /// Marks the query as unanswered by the publisher.
    pub fn discard(&mut self) -> Result<(), ProtocolError> {
        self.expect(SessionState::RequestSent)?;
        self.state = SessionState::Discarded;
        Ok(())
    }

    fn expect(&self, expected: SessionState) -> Result<(), ProtocolError> {
        if self.state != expected {
            return Err(ProtocolError::WrongState {
                expected,
                actual: self.state,
            });
        }
        Ok(())
    }
}

/// Starts a query. `tau` is required at level 2 and rejected elsewhere.
pub fn q_begin<R: RngCore + CryptoRng>(
    level: Level,
    location: &Location,
    config: &SpaceConfig,
    tau: Option<u64>,
    keys: &KeySource,
    rng: &mut R,
) -> Result<(QuerySession, Option<DistanceRequest>), ProtocolError> {
    let tau_sq = tau.map(|t| u128::from(t) * u128::from(t));
    q_begin_with_tau_sq(level, location, config, tau_sq, keys, rng)
}

/// Like [`q_begin`] but takes the squared threshold directly, which need
/// not be a perfect square.
pub fn q_begin_with_tau_sq<R: RngCore + CryptoRng>(
    level: Level,
    location: &Location,
    config: &SpaceConfig,
    tau_sq: Option<u128>,
    keys: &KeySource,
    rng: &mut R,
) -> Result<(QuerySession, Option<DistanceRequest>), ProtocolError> {
    match (level, tau_sq) {
        (Level::QuerierThreshold, None) => return Err(ProtocolError::MissingTau),
        (Level::QuerierThreshold, Some(t)) if t > MAX_TAU_SQ => return Err(ProtocolError::TauOutOfRange(t)),
        (Level::QuerierThreshold, Some(_)) => {}
        (_, Some(_)) => return Err(ProtocolError::TauAtWrongLevel),
        (_, None) => {}
    }
    config.check(location)?;
    let mut session = QuerySession {
        level,
        dim: location.dim(),
        keys: None,
        state: SessionState::Init,
    };
    if level == Level::Location {
        session.state = SessionState::RequestSent;
        return Ok((session, None));
    }

    let kp = keys.keypair(rng)?;
    let req = DistanceRequest {
        pk: kp.public().clone(),
        one: kp.encrypt(&BigUint::from(1u8), rng)?,
        sum_sq: kp.encrypt(&BigUint::from(location.norm_sq()), rng)?,
        neg_two_y: location
            .coords()
            .iter()
            .map(|&y| kp.encrypt_signed(&BigInt::from(-2 * y), rng))
            .collect::<Result<_, _>>()?,
        tau_sq: tau_sq
            .map(|t| kp.encrypt(&BigUint::from(t), rng))
            .transpose()?,
    };
    session.keys = Some(kp);
    session.state = SessionState::RequestSent;
    Ok((session, Some(req)))
}

/// Ordering of two blinded plaintexts, which equals the ordering of the
/// distance and the threshold.
pub fn interpret_comparison(blinded_dist: &BigUint, blinded_tau: &BigUint) -> Trichotomy {
    blinded_dist.cmp(blinded_tau).into()
}

/// Unwraps the publisher's response with the querier's attribute key.
pub fn q_finish(
    session: &mut QuerySession,
    resp: &NestedResponse,
    abe_pk: &abe::PublicKey,
    abe_sk: &abe::SecretKey,
) -> Result<QueryResult, ProtocolError> {
    session.expect(SessionState::RequestSent)?;
    if resp.level != session.level {
        return Err(ProtocolError::LevelMismatch {
            expected: session.level,
            got: resp.level,
        });
    }
    if resp.dim != session.dim {
        return Err(ProtocolError::DimensionMismatch(session.dim, resp.dim));
    }
    let expected = session.level.response_parts(session.dim);
    if resp.parts.len() != expected {
        return Err(ProtocolError::ComponentCount {
            expected,
            got: resp.parts.len(),
        });
    }
    session.state = SessionState::Responded;

    let payloads = resp
        .parts
        .iter()
        .map(|p| abe::decrypt(abe_pk, abe_sk, p))
        .collect::<Result<Vec<_>, _>>()?;

    let result = if session.level == Level::Location {
        let coords = payloads
            .iter()
            .map(|p| {
                <[u8; 8]>::try_from(p.as_slice())
                    .map(i64::from_be_bytes)
                    .map_err(|_| ProtocolError::Malformed(format!("coordinate of {} bytes", p.len())))
            })
            .collect::<Result<Vec<_>, _>>()?;
        QueryResult::Location(Location::new(coords)?)
    } else {
        let kp = session.keys.as_ref().expect("levels 1-3 always hold a keypair");
        let plain = payloads
            .iter()
            .map(|p| {
                let ct = kp.public().ciphertext_from_bytes(p)?;
                Ok(kp.decrypt(&ct)?)
            })
            .collect::<Result<Vec<_>, ProtocolError>>()?;
        match session.level {
            Level::Distance => {
                let squared = plain[0]
                    .to_u128()
                    .filter(|&v| v <= super::MAX_GRID_DIST_SQ)
                    .ok_or_else(|| ProtocolError::Malformed("distance out of range".into()))?;
                QueryResult::Distance {
                    squared,
                    meters: (squared as f64).sqrt(),
                }
            }
            _ => QueryResult::Comparison(interpret_comparison(&plain[0], &plain[1])),
        }
    };
    session.state = SessionState::Done;
    Ok(result)
}
