use crate::abe;
use crate::codec::{DecodeError, Reader, Writer};
use crate::paillier::{Ciphertext, PublicKey};

use super::{Level, ProtocolError};

pub const MSG_QUERY: u8 = 0x01;
pub const MSG_RESPONSE: u8 = 0x02;

/// The querier's encrypted coordinates: `E(1)`, `E(Σy²)`, `E(-2y_i)` per
/// axis and, at level 2 only, `E(τ²)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistanceRequest {
    pub(super) pk: PublicKey,
    pub(super) one: Ciphertext,
    pub(super) sum_sq: Ciphertext,
    pub(super) neg_two_y: Vec<Ciphertext>,
    pub(super) tau_sq: Option<Ciphertext>,
}

impl DistanceRequest {
    pub fn public_key(&self) -> &PublicKey {
        &self.pk
    }

    pub fn dim(&self) -> usize {
        self.neg_two_y.len()
    }

    pub fn has_tau(&self) -> bool {
        self.tau_sq.is_some()
    }

    /// Ciphertexts in wire order.
    pub fn ciphertexts(&self) -> impl Iterator<Item = &Ciphertext> {
        [&self.one, &self.sum_sq]
            .into_iter()
            .chain(&self.neg_two_y)
            .chain(self.tau_sq.as_ref())
    }

    pub fn component_count(&self) -> usize {
        self.dim() + 2 + usize::from(self.has_tau())
    }

    /// Bytes of ciphertext material, excluding the key and framing.
    pub fn ciphertext_payload_len(&self) -> usize {
        self.component_count() * self.pk.ciphertext_len()
    }

    fn write(&self, w: &mut Writer) {
        w.prefixed(&self.pk.to_bytes());
        for ct in self.ciphertexts() {
            w.prefixed(&ct.to_bytes());
        }
    }

    fn read(r: &mut Reader<'_>, level: Level, dim: usize) -> Result<Self, ProtocolError> {
        let pk = PublicKey::from_bytes(r.prefixed()?)?;
        let count = dim + 2 + usize::from(level == Level::QuerierThreshold);
        let mut cts = Vec::with_capacity(count);
        while r.remaining() > 0 {
            cts.push(pk.ciphertext_from_bytes(r.prefixed()?)?);
        }
        if cts.len() != count {
            return Err(ProtocolError::ComponentCount {
                expected: count,
                got: cts.len(),
            });
        }
        let mut it = cts.into_iter();
        let one = it.next().expect("count checked");
        let sum_sq = it.next().expect("count checked");
        let neg_two_y = it.by_ref().take(dim).collect();
        let tau_sq = it.next();
        Ok(DistanceRequest {
            pk,
            one,
            sum_sq,
            neg_two_y,
            tau_sq,
        })
    }
}

/// A query as sent on the wire: who asks, at which level, and the
/// encrypted request (absent at level 4).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryMessage {
    pub querier: String,
    pub level: Level,
    pub dim: usize,
    pub request: Option<DistanceRequest>,
}

impl QueryMessage {
    pub fn new(querier: impl Into<String>, level: Level, dim: usize, request: Option<DistanceRequest>) -> Self {
        QueryMessage {
            querier: querier.into(),
            level,
            dim,
            request,
        }
    }

    /// Type, level, dimension, then length-prefixed components: querier id,
    /// public key, ciphertexts.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.u8(MSG_QUERY).u8(self.level.as_u8()).u8(self.dim as u8);
        w.string(&self.querier);
        if let Some(req) = &self.request {
            req.write(&mut w);
        }
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ProtocolError> {
        let mut r = Reader::new(bytes);
        let kind = r.u8()?;
        if kind != MSG_QUERY {
            return Err(DecodeError::invalid(format!("expected a query message, got type {kind}")).into());
        }
        let level = Level::from_u8(r.u8()?)?;
        let dim = r.u8()? as usize;
        if !(2..=3).contains(&dim) {
            return Err(DecodeError::invalid(format!("dimension {dim}")).into());
        }
        let querier = r.string()?;
        let request = match level {
            Level::Location => None,
            _ => Some(DistanceRequest::read(&mut r, level, dim)?),
        };
        r.finish()?;
        Ok(QueryMessage {
            querier,
            level,
            dim,
            request,
        })
    }
}

/// ABE-wrapped results: two parts at levels 1–2, one at level 3 and one
/// per coordinate at level 4.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NestedResponse {
    pub level: Level,
    pub dim: usize,
    pub parts: Vec<abe::Ciphertext>,
}

impl NestedResponse {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.u8(MSG_RESPONSE).u8(self.level.as_u8()).u8(self.dim as u8);
        for part in &self.parts {
            w.prefixed(&part.to_bytes());
        }
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ProtocolError> {
        let mut r = Reader::new(bytes);
        let kind = r.u8()?;
        if kind != MSG_RESPONSE {
            return Err(DecodeError::invalid(format!("expected a response message, got type {kind}")).into());
        }
        let level = Level::from_u8(r.u8()?)?;
        let dim = r.u8()? as usize;
        if !(2..=3).contains(&dim) {
            return Err(DecodeError::invalid(format!("dimension {dim}")).into());
        }
        let mut parts = Vec::new();
        while r.remaining() > 0 {
            parts.push(abe::Ciphertext::from_bytes(r.prefixed()?)?);
        }
        let expected = level.response_parts(dim);
        if parts.len() != expected {
            return Err(ProtocolError::ComponentCount {
                expected,
                got: parts.len(),
            });
        }
        Ok(NestedResponse { level, dim, parts })
    }
}
