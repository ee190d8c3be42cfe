use std::sync::Mutex;

use rand_chacha::ChaCha20Rng;

use crate::abe::{self, AccessTree};
use crate::codec::{DecodeError, Reader, Writer};
use crate::geo::{Location, SpaceConfig};
use crate::inference::{GuardDecision, PolicyGuard};
use crate::protocol::{
    p_respond, q_begin, q_finish, DisclosureFunction, KeySource, Level, NestedResponse, QueryMessage, QueryResult,
    Trichotomy, MAX_TAU_SQ,
};

use super::{call, error_reply, levels_mask, Handler, Message, NetError, Transport};

/// Which levels a publisher answers (a level without a tree is disabled),
/// its level-1 threshold and its level-4 disclosure.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PublisherPolicy {
    pub trees: [Option<AccessTree>; 4],
    pub tau: Option<u64>,
    pub disclosure: DisclosureFunction,
}

impl PublisherPolicy {
    pub fn tree(&self, level: Level) -> Option<&AccessTree> {
        self.trees[level.as_u8() as usize - 1].as_ref()
    }

    pub fn with_tree(mut self, level: Level, tree: AccessTree) -> Self {
        self.trees[level.as_u8() as usize - 1] = Some(tree);
        self
    }

    pub fn levels_mask(&self) -> u8 {
        levels_mask(Level::ALL.into_iter().filter(|&l| self.tree(l).is_some()))
    }

    pub fn validate(&self) -> Result<(), NetError> {
        if self.tree(Level::PublisherThreshold).is_some() {
            let tau = self
                .tau
                .ok_or_else(|| NetError::Policy("level 1 is enabled but no threshold is set".into()))?;
            if tau == 0 || u128::from(tau) * u128::from(tau) > MAX_TAU_SQ {
                return Err(NetError::Policy(format!("threshold {tau} is out of range")));
            }
        }
        Ok(())
    }

    pub(crate) fn write(&self, w: &mut Writer) {
        for t in &self.trees {
            match t {
                Some(t) => {
                    w.u8(1);
                    t.write(w);
                }
                None => {
                    w.u8(0);
                }
            }
        }
        match self.tau {
            Some(t) => w.u8(1).u64(t),
            None => w.u8(0),
        };
        self.disclosure.write(w);
    }

    pub(crate) fn read(r: &mut Reader<'_>) -> Result<Self, NetError> {
        let mut trees: [Option<AccessTree>; 4] = Default::default();
        for t in &mut trees {
            *t = match r.u8()? {
                0 => None,
                1 => Some(AccessTree::read(r)?),
                f => return Err(DecodeError::invalid(format!("bad tree flag {f}")).into()),
            };
        }
        let tau = match r.u8()? {
            0 => None,
            1 => Some(r.u64()?),
            f => return Err(DecodeError::invalid(format!("bad threshold flag {f}")).into()),
        };
        Ok(PublisherPolicy {
            trees,
            tau,
            disclosure: DisclosureFunction::read(r)?,
        })
    }
}

struct PeerState {
    location: Location,
    guard: Option<PolicyGuard>,
    rng: ChaCha20Rng,
}

/// Answers queries about one publisher's current location.
///
/// Queries at disabled levels, and queries the guard rejects, get no reply
/// at all, so a querier cannot tell a policy refusal from an absent peer.
pub struct PublisherPeer {
    user: String,
    abe_pk: abe::PublicKey,
    policy: PublisherPolicy,
    state: Mutex<PeerState>,
}

impl PublisherPeer {
    pub fn new(
        user: impl Into<String>,
        abe_pk: abe::PublicKey,
        policy: PublisherPolicy,
        location: Location,
        rng: ChaCha20Rng,
    ) -> Result<Self, NetError> {
        policy.validate()?;
        Ok(PublisherPeer {
            user: user.into(),
            abe_pk,
            policy,
            state: Mutex::new(PeerState {
                location,
                guard: None,
                rng,
            }),
        })
    }

    /// Turns on the per-epoch query limits.
    pub fn with_guard(self) -> Self {
        {
            let mut st = self.state.lock().unwrap();
            st.guard = Some(PolicyGuard::new(st.location.dim()));
        }
        self
    }

    pub fn user(&self) -> &str {
        &self.user
    }

    pub fn policy(&self) -> &PublisherPolicy {
        &self.policy
    }

    pub fn location(&self) -> Location {
        self.state.lock().unwrap().location.clone()
    }

    /// Updates the location; this starts a new guard epoch.
    pub fn publish(&self, location: Location) -> Result<(), NetError> {
        let mut st = self.state.lock().unwrap();
        if location.dim() != st.location.dim() {
            return Err(crate::protocol::ProtocolError::DimensionMismatch(st.location.dim(), location.dim())
            .into());
        }
        st.location = location;
        if let Some(g) = &mut st.guard {
            g.new_epoch();
        }
        Ok(())
    }

    /// Feeds a comparison outcome to the guard. The publisher never sees
    /// blinded results, so this is the only way the comparison limit learns
    /// about them.
    pub fn observe(&self, querier: &str, level: Level, outcome: Trichotomy) {
        if let Some(g) = &mut self.state.lock().unwrap().guard {
            g.observe(querier, level, outcome);
        }
    }

    /// `Ok(None)` is a silent discard.
    pub fn respond(&self, query: &QueryMessage) -> Result<Option<NestedResponse>, NetError> {
        let Some(tree) = self.policy.tree(query.level) else {
            return Ok(None);
        };
        let mut st = self.state.lock().unwrap();
        let st = &mut *st;
        if query.dim != st.location.dim() {
            return Err(crate::protocol::ProtocolError::DimensionMismatch(st.location.dim(), query.dim)
            .into());
        }
        if let Some(g) = &mut st.guard {
            if g.check(&query.querier, query.level) == GuardDecision::Discard {
                return Ok(None);
            }
        }
        let resp = p_respond(
            query.level,
            query.request.as_ref(),
            &st.location,
            tree,
            &self.abe_pk,
            self.policy.tau,
            self.policy.disclosure,
            &mut st.rng,
        )?;
        Ok(Some(resp))
    }
}

impl Handler for PublisherPeer {
    fn handle(&self, msg: &[u8]) -> Option<Vec<u8>> {
        match Message::from_bytes(msg) {
            Ok(Message::Query(q)) => match self.respond(&q) {
                Ok(Some(resp)) => Some(resp.to_bytes()),
                Ok(None) => None,
                Err(e) => error_reply(e),
            },
            Ok(Message::DirectoryLookup { publisher }) if publisher == self.user => Some(
                Message::Directory {
                    publisher,
                    levels: self.policy.levels_mask(),
                }
                .to_bytes(),
            ),
            Ok(_) => error_reply("a publisher answers only queries and lookups of itself"),
            Err(e) => error_reply(e),
        }
    }
}

/// Querier-side state: its ABE key and how it picks Paillier keys.
pub struct Querier {
    user: String,
    abe_pk: abe::PublicKey,
    abe_sk: abe::SecretKey,
    config: SpaceConfig,
    keys: KeySource,
    rng: ChaCha20Rng,
}

impl Querier {
    pub fn new(
        user: impl Into<String>,
        abe_pk: abe::PublicKey,
        abe_sk: abe::SecretKey,
        config: SpaceConfig,
        keys: KeySource,
        rng: ChaCha20Rng,
    ) -> Self {
        Querier {
            user: user.into(),
            abe_pk,
            abe_sk,
            config,
            keys,
            rng,
        }
    }

    pub fn user(&self) -> &str {
        &self.user
    }

    /// Runs one query over `t`. `Ok(None)` means the publisher stayed
    /// silent (level disabled or query discarded).
    pub fn query<T: Transport + ?Sized>(
        &mut self,
        t: &mut T,
        level: Level,
        from: &Location,
        tau: Option<u64>,
    ) -> Result<Option<QueryResult>, NetError> {
        let (mut session, req) = q_begin(level, from, &self.config, tau, &self.keys, &mut self.rng)?;
        let msg = Message::Query(QueryMessage::new(self.user.clone(), level, from.dim(), req));
        match call(t, &msg)? {
            None => {
                session.discard()?;
                Ok(None)
            }
            Some(Message::Response(resp)) => Ok(Some(q_finish(&mut session, &resp, &self.abe_pk, &self.abe_sk)?)),
            Some(_) => Err(NetError::Unexpected("a query response")),
        }
    }
}
