use rand::{CryptoRng, RngCore};

use crate::abe::{self, AccessTree};
use crate::geo::{euclid_dist_sq, Location, SpaceConfig};
use crate::protocol::{
    p_respond_compare, p_respond_distance, q_begin, q_begin_with_tau_sq, q_finish, KeySource, Level, QueryResult,
    Trichotomy,
};

use super::{GuardDecision, InferenceError, Outcome, PolicyGuard, QueryLog, QueryOracle, TranscriptEntry};

const ATTACKER: &str = "attacker";

/// Plaintext publisher: answers from its true location, optionally behind a
/// [`PolicyGuard`].
#[derive(Debug, Clone)]
pub struct SimulatedPublisher {
    location: Location,
    tau: u64,
    guard: Option<PolicyGuard>,
    log: QueryLog,
}

impl SimulatedPublisher {
    pub fn new(location: Location, tau: u64) -> Self {
        SimulatedPublisher {
            location,
            tau,
            guard: None,
            log: QueryLog::default(),
        }
    }

    pub fn guarded(location: Location, tau: u64) -> Self {
        let guard = PolicyGuard::new(location.dim());
        SimulatedPublisher {
            guard: Some(guard),
            ..Self::new(location, tau)
        }
    }

    pub fn location(&self) -> &Location {
        &self.location
    }

    /// Moves the publisher, which opens a new guard epoch.
    pub fn move_to(&mut self, location: Location) {
        self.location = location;
        if let Some(g) = &mut self.guard {
            g.new_epoch();
        }
    }

    fn allowed(&mut self, level: Level) -> bool {
        self.guard
            .as_mut()
            .is_none_or(|g| g.check(ATTACKER, level) == GuardDecision::Allow)
    }

    fn compare(&mut self, level: Level, from: &Location, tau_sq: u128) -> Result<Option<Trichotomy>, InferenceError> {
        let entry_tau = (level == Level::QuerierThreshold).then_some(tau_sq);
        if !self.allowed(level) {
            self.record(level, from, entry_tau, Outcome::Discarded);
            return Ok(None);
        }
        let t = Trichotomy::from(euclid_dist_sq(&self.location, from)?.cmp(&tau_sq));
        if let Some(g) = &mut self.guard {
            g.observe(ATTACKER, level, t);
        }
        self.record(level, from, entry_tau, Outcome::Comparison(t));
        Ok(Some(t))
    }

    fn record(&mut self, level: Level, from: &Location, tau_sq: Option<u128>, outcome: Outcome) {
        self.log.record(TranscriptEntry {
            level,
            from: from.clone(),
            tau_sq,
            outcome,
        });
    }
}

impl QueryOracle for SimulatedPublisher {
    fn dim(&self) -> usize {
        self.location.dim()
    }

    fn level1(&mut self, from: &Location) -> Result<Option<Trichotomy>, InferenceError> {
        let tau_sq = u128::from(self.tau) * u128::from(self.tau);
        self.compare(Level::PublisherThreshold, from, tau_sq)
    }

    fn level2(&mut self, from: &Location, tau_sq: u128) -> Result<Option<Trichotomy>, InferenceError> {
        self.compare(Level::QuerierThreshold, from, tau_sq)
    }

    fn level3(&mut self, from: &Location) -> Result<Option<u128>, InferenceError> {
        if !self.allowed(Level::Distance) {
            self.record(Level::Distance, from, None, Outcome::Discarded);
            return Ok(None);
        }
        let d = euclid_dist_sq(&self.location, from)?;
        self.record(Level::Distance, from, None, Outcome::Distance(d));
        Ok(Some(d))
    }

    fn log(&self) -> &QueryLog {
        &self.log
    }
}

/// Runs every query through the real request / response / unwrap path.
///
/// The guard sees only what the querier reports back as the outcome: the
/// publisher cannot read blinded comparisons itself.
pub struct ProtocolOracle<R> {
    config: SpaceConfig,
    location: Location,
    tau: u64,
    tree: AccessTree,
    abe_pk: abe::PublicKey,
    abe_sk: abe::SecretKey,
    keys: KeySource,
    guard: Option<PolicyGuard>,
    rng: R,
    log: QueryLog,
}

impl<R: RngCore + CryptoRng> ProtocolOracle<R> {
    /// `abe_sk` is the attacker's key and must satisfy `tree`.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        config: SpaceConfig,
        location: Location,
        tau: u64,
        tree: AccessTree,
        abe_pk: abe::PublicKey,
        abe_sk: abe::SecretKey,
        keys: KeySource,
        rng: R,
    ) -> Self {
        ProtocolOracle {
            config,
            location,
            tau,
            tree,
            abe_pk,
            abe_sk,
            keys,
            guard: None,
            rng,
            log: QueryLog::default(),
        }
    }

    pub fn with_guard(mut self) -> Self {
        self.guard = Some(PolicyGuard::new(self.location.dim()));
        self
    }

    fn allowed(&mut self, level: Level) -> bool {
        self.guard
            .as_mut()
            .is_none_or(|g| g.check(ATTACKER, level) == GuardDecision::Allow)
    }

    fn run(&mut self, level: Level, from: &Location, tau_sq: Option<u128>) -> Result<Option<QueryResult>, InferenceError> {
        if !self.allowed(level) {
            self.log.record(TranscriptEntry {
                level,
                from: from.clone(),
                tau_sq,
                outcome: Outcome::Discarded,
            });
            return Ok(None);
        }
        let (mut session, req) = match tau_sq {
            Some(t) => q_begin_with_tau_sq(level, from, &self.config, Some(t), &self.keys, &mut self.rng)?,
            None => q_begin(level, from, &self.config, None, &self.keys, &mut self.rng)?,
        };
        let req = req.expect("levels 1-3 produce a request");
        let resp = match level {
            Level::Distance => p_respond_distance(&req, &self.location, &self.tree, &self.abe_pk, &mut self.rng)?,
            Level::PublisherThreshold => p_respond_compare(
                &req,
                &self.location,
                &self.tree,
                &self.abe_pk,
                Some(self.tau),
                &mut self.rng,
            )?,
            _ => p_respond_compare(&req, &self.location, &self.tree, &self.abe_pk, None, &mut self.rng)?,
        };
        let result = q_finish(&mut session, &resp, &self.abe_pk, &self.abe_sk)?;
        let outcome = match result {
            QueryResult::Comparison(t) => {
                if let Some(g) = &mut self.guard {
                    g.observe(ATTACKER, level, t);
                }
                Outcome::Comparison(t)
            }
            QueryResult::Distance { squared, .. } => Outcome::Distance(squared),
            QueryResult::Location(_) => unreachable!("level 4 is not an inference oracle"),
        };
        self.log.record(TranscriptEntry {
            level,
            from: from.clone(),
            tau_sq,
            outcome,
        });
        Ok(Some(result))
    }
}

impl<R: RngCore + CryptoRng> QueryOracle for ProtocolOracle<R> {
    fn dim(&self) -> usize {
        self.location.dim()
    }

    fn level1(&mut self, from: &Location) -> Result<Option<Trichotomy>, InferenceError> {
        Ok(self.run(Level::PublisherThreshold, from, None)?.map(|r| match r {
            QueryResult::Comparison(t) => t,
            _ => unreachable!(),
        }))
    }

    fn level2(&mut self, from: &Location, tau_sq: u128) -> Result<Option<Trichotomy>, InferenceError> {
        Ok(self.run(Level::QuerierThreshold, from, Some(tau_sq))?.map(|r| match r {
            QueryResult::Comparison(t) => t,
            _ => unreachable!(),
        }))
    }

    fn level3(&mut self, from: &Location) -> Result<Option<u128>, InferenceError> {
        Ok(self.run(Level::Distance, from, None)?.map(|r| match r {
            QueryResult::Distance { squared, .. } => squared,
            _ => unreachable!(),
        }))
    }

    fn log(&self) -> &QueryLog {
        &self.log
    }
}
