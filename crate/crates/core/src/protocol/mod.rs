//! The four leveled location queries as querier/publisher exchanges.
//!
//! The querier builds a [`DistanceRequest`] under a Paillier key only it
//! holds; the publisher evaluates the distance (or a blinded comparison)
//! homomorphically and wraps each result under its per-level access tree.
//! Level 4 sends no ciphertexts at all: the publisher simply wraps each
//! coordinate of its disclosed location.

mod blind;
mod disclosure;
mod message;
mod publisher;
mod session;

use std::fmt;

use thiserror::Error;

use crate::abe::AbeError;
use crate::codec::DecodeError;
use crate::geo::GeoError;
use crate::paillier::PaillierError;

pub use blind::{sample_blinds, BlindPair, DELTA_BITS, DELTA_PRIME_BITS};
pub use disclosure::DisclosureFunction;
pub use message::{DistanceRequest, NestedResponse, QueryMessage, MSG_QUERY, MSG_RESPONSE};
pub use publisher::{
    blinded_comparison, homomorphic_distance_sq, p_respond, p_respond_compare, p_respond_distance,
    p_respond_level4, ThresholdSource,
};
pub use session::{
    interpret_comparison, q_begin, q_begin_with_tau_sq, q_finish, KeySource, QueryResult, QuerySession,
    SessionState, Trichotomy,
};

/// Largest accepted threshold square, equal to the largest squared distance.
pub const MAX_TAU_SQ: u128 = crate::geo::MAX_DIST_SQ;

/// Largest squared distance between any two grid points, `3 · (2^27)^2`.
pub const MAX_GRID_DIST_SQ: u128 = 3 << 54;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Level {
    /// Is the querier within the publisher's threshold?
    PublisherThreshold = 1,
    /// Is the publisher within the querier's threshold?
    QuerierThreshold = 2,
    /// Exact distance.
    Distance = 3,
    /// A function of the publisher's location.
    Location = 4,
}

impl Level {
    pub const ALL: [Level; 4] = [
        Level::PublisherThreshold,
        Level::QuerierThreshold,
        Level::Distance,
        Level::Location,
    ];

    pub fn from_u8(v: u8) -> Result<Self, ProtocolError> {
        match v {
            1 => Ok(Level::PublisherThreshold),
            2 => Ok(Level::QuerierThreshold),
            3 => Ok(Level::Distance),
            4 => Ok(Level::Location),
            other => Err(ProtocolError::UnknownLevel(other)),
        }
    }

    pub fn as_u8(self) -> u8 {
        self as u8
    }

    pub fn is_comparison(self) -> bool {
        matches!(self, Level::PublisherThreshold | Level::QuerierThreshold)
    }

    /// Number of nested ciphertexts in a response for dimension `dim`.
    pub fn response_parts(self, dim: usize) -> usize {
        match self {
            Level::PublisherThreshold | Level::QuerierThreshold => 2,
            Level::Distance => 1,
            Level::Location => dim,
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_u8())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProtocolError {
    #[error("unknown query level {0}")]
    UnknownLevel(u8),
    #[error("a querier threshold is only allowed at level 2")]
    TauAtWrongLevel,
    #[error("level 2 requires a querier threshold")]
    MissingTau,
    #[error("threshold square {0} exceeds 2^52")]
    TauOutOfRange(u128),
    #[error("level {level} needs {expected}, got {got}")]
    ThresholdSource {
        level: Level,
        expected: &'static str,
        got: &'static str,
    },
    #[error("session is {actual:?}, expected {expected:?}")]
    WrongState {
        expected: SessionState,
        actual: SessionState,
    },
    #[error("expected a level {expected} message, got level {got}")]
    LevelMismatch { expected: Level, got: Level },
    #[error("expected {expected} components, got {got}")]
    ComponentCount { expected: usize, got: usize },
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("Paillier modulus of {bits} bits is too small for level {level}")]
    KeyTooSmall { bits: u32, level: Level },
    #[error("blinding factors out of range: {0}")]
    BlindOutOfRange(&'static str),
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error(transparent)]
    Abe(#[from] AbeError),
    #[error(transparent)]
    Paillier(#[from] PaillierError),
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error(transparent)]
    Decode(#[from] DecodeError),
}

impl ProtocolError {
    /// True when the failure is the access-control outcome rather than a fault.
    pub fn is_unsatisfied(&self) -> bool {
        matches!(self, ProtocolError::Abe(AbeError::NotSatisfied))
    }
}
