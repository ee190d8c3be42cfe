use std::collections::HashMap;

use crate::protocol::{Level, Trichotomy};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GuardDecision {
    Allow,
    Discard,
}

#[derive(Debug, Clone, Copy)]
struct ComparisonTrack {
    first: Trichotomy,
    blocked: bool,
}

/// Per-publisher query limits for one epoch (a period in which the
/// publisher's location is unchanged).
///
/// * level 3: at most `dim` answered queries per querier;
/// * levels 1–2: answered until an outcome differs from the first one seen,
///   after which that querier is cut off at that level;
/// * level 4: unrestricted.
#[derive(Debug, Clone)]
pub struct PolicyGuard {
    dim: usize,
    epoch: u64,
    distance_counts: HashMap<String, usize>,
    comparisons: HashMap<(String, Level), ComparisonTrack>,
}

impl PolicyGuard {
    pub fn new(dim: usize) -> Self {
        PolicyGuard {
            dim,
            epoch: 0,
            distance_counts: HashMap::new(),
            comparisons: HashMap::new(),
        }
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn level3_limit(&self) -> usize {
        self.dim
    }

    /// Starts a new epoch; call whenever the publisher moves.
    pub fn new_epoch(&mut self) {
        self.epoch += 1;
        self.distance_counts.clear();
        self.comparisons.clear();
    }

    /// Decides whether to answer; an allowed level-3 query is counted.
    pub fn check(&mut self, querier: &str, level: Level) -> GuardDecision {
        match level {
            Level::Location => GuardDecision::Allow,
            Level::Distance => {
                let count = self.distance_counts.entry(querier.to_string()).or_insert(0);
                if *count < self.dim {
                    *count += 1;
                    GuardDecision::Allow
                } else {
                    GuardDecision::Discard
                }
            }
            Level::PublisherThreshold | Level::QuerierThreshold => {
                match self.comparisons.get(&(querier.to_string(), level)) {
                    Some(track) if track.blocked => GuardDecision::Discard,
                    _ => GuardDecision::Allow,
                }
            }
        }
    }

    /// Records the outcome of an answered comparison query.
    pub fn observe(&mut self, querier: &str, level: Level, outcome: Trichotomy) {
        if !level.is_comparison() {
            return;
        }
        let track = self
            .comparisons
            .entry((querier.to_string(), level))
            .or_insert(ComparisonTrack {
                first: outcome,
                blocked: false,
            });
        if outcome != track.first {
            track.blocked = true;
        }
    }
}

/// Records `outcome_so_far` (the result of the previous answered query, if
/// any) and then decides on the next query.
pub fn guard_check(
    guard: &mut PolicyGuard,
    querier: &str,
    level: Level,
    outcome_so_far: Option<Trichotomy>,
) -> GuardDecision {
    if let Some(o) = outcome_so_far {
        guard.observe(querier, level, o);
    }
    guard.check(querier, level)
}
