//! Inference attacks that localize a publisher from repeated queries, and
//! the publisher-side guard that limits them.
//!
//! Attacks talk to a [`QueryOracle`], which is either a plaintext
//! simulation ([`SimulatedPublisher`]) or the full cryptographic stack
//! ([`ProtocolOracle`]). Both report `None` for a discarded query.

mod attacks;
mod guard;
mod oracle;
mod outside;

use std::fmt;

use thiserror::Error;

use crate::geo::{GeoError, Location};
use crate::protocol::{Level, ProtocolError, Trichotomy};

pub use attacks::{
    attack_level1_inside, attack_level2, attack_level3, attack_level3_from, solve_level3, Level1Report,
    Level2Report, Level3Report,
};
pub use guard::{guard_check, GuardDecision, PolicyGuard};
pub use oracle::{ProtocolOracle, SimulatedPublisher};
pub use outside::{expected_level1_outside_queries, monte_carlo_first_hit, MonteCarloReport, OutsideEstimate};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InferenceError {
    #[error("starting point is not strictly inside the threshold circle (got {0})")]
    NotInside(Trichotomy),
    #[error("query placements are degenerate after {0} attempts")]
    Singular(usize),
    #[error("answers are inconsistent with any grid location")]
    Inconsistent,
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Geo(#[from] GeoError),
}

/// What one query returned.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Comparison(Trichotomy),
    Distance(u128),
    Discarded,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Comparison(t) => write!(f, "{t}"),
            Outcome::Distance(d) => write!(f, "{d}"),
            Outcome::Discarded => f.write_str("discarded"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TranscriptEntry {
    pub level: Level,
    pub from: Location,
    pub tau_sq: Option<u128>,
    pub outcome: Outcome,
}

/// Per-level counters and the ordered list of queries.
#[derive(Debug, Clone, Default)]
pub struct QueryLog {
    issued: [usize; 4],
    discarded: usize,
    entries: Vec<TranscriptEntry>,
}

impl QueryLog {
    pub fn record(&mut self, entry: TranscriptEntry) {
        self.issued[entry.level.as_u8() as usize - 1] += 1;
        if entry.outcome == Outcome::Discarded {
            self.discarded += 1;
        }
        self.entries.push(entry);
    }

    pub fn issued(&self, level: Level) -> usize {
        self.issued[level.as_u8() as usize - 1]
    }

    pub fn total(&self) -> usize {
        self.entries.len()
    }

    pub fn discarded(&self) -> usize {
        self.discarded
    }

    pub fn entries(&self) -> &[TranscriptEntry] {
        &self.entries
    }

    /// One `key=value` line per query.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (i, e) in self.entries.iter().enumerate() {
            out.push_str(&format!("query={} level={} from={}", i + 1, e.level, e.from));
            if let Some(t) = e.tau_sq {
                out.push_str(&format!(" tau_sq={t}"));
            }
            out.push_str(&format!(" outcome={}\n", e.outcome));
        }
        out
    }
}

/// A publisher that answers leveled queries from chosen locations.
pub trait QueryOracle {
    fn dim(&self) -> usize;

    /// Level 1 against the publisher's own threshold.
    fn level1(&mut self, from: &Location) -> Result<Option<Trichotomy>, InferenceError>;

    /// Level 2 against a squared threshold chosen by the querier.
    fn level2(&mut self, from: &Location, tau_sq: u128) -> Result<Option<Trichotomy>, InferenceError>;

    /// Level 3: the exact squared distance.
    fn level3(&mut self, from: &Location) -> Result<Option<u128>, InferenceError>;

    fn log(&self) -> &QueryLog;
}
