//! Message framing, the service provider, publisher and querier peers, and
//! two transports: an in-process [`SimNetwork`] and plain TCP.

mod frame;
mod message;
mod peer;
mod sim;
mod sp;
mod store;
mod tcp;

use thiserror::Error;

use crate::abe::AbeError;
use crate::codec::DecodeError;
use crate::geo::GeoError;
use crate::protocol::ProtocolError;

pub use frame::{decode_frame, encode_frame, read_frame, write_frame, FRAME_VERSION, MAX_FRAME};
pub use message::{levels_mask, mask_has, Message};
pub use peer::{PublisherPeer, PublisherPolicy, Querier};
pub use sim::{Exchange, SimLink, SimNetwork};
pub use sp::{fetch_public_key, lookup_directory, register_remote, ServiceProvider};
pub use store::{KeyFile, Store, UserRecord};
pub use tcp::{serve, TcpTransport};

#[derive(Debug, Error)]
pub enum NetError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("frame of {0} bytes exceeds the limit")]
    FrameTooLarge(usize),
    #[error("unsupported frame version {0}")]
    BadVersion(u8),
    #[error("malformed message: {0}")]
    Malformed(String),
    #[error("connection closed before a frame arrived")]
    Closed,
    #[error("peer reported: {0}")]
    Remote(String),
    #[error("unexpected reply: expected {0}")]
    Unexpected(&'static str),
    #[error("user {0:?} is already registered")]
    Duplicate(String),
    #[error("unknown user {0:?}")]
    UnknownUser(String),
    #[error("no peer named {0:?}")]
    UnknownPeer(String),
    #[error("invalid policy: {0}")]
    Policy(String),
    #[error("bad store file: {0}")]
    Store(String),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Abe(#[from] AbeError),
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error(transparent)]
    Decode(#[from] DecodeError),
}

/// Server side of a request/response exchange.
pub trait Handler: Send + Sync {
    /// Replies to one message; `None` means stay silent and close.
    fn handle(&self, msg: &[u8]) -> Option<Vec<u8>>;
}

/// Client side of a request/response exchange.
pub trait Transport {
    /// Sends `msg` and waits for the reply; `Ok(None)` if the peer closed
    /// without answering.
    fn exchange(&mut self, msg: &[u8]) -> Result<Option<Vec<u8>>, NetError>;
}

/// Sends `msg` and decodes the reply, turning an error message into
/// [`NetError::Remote`].
pub(crate) fn call<T: Transport + ?Sized>(t: &mut T, msg: &Message) -> Result<Option<Message>, NetError> {
    match t.exchange(&msg.to_bytes())? {
        None => Ok(None),
        Some(bytes) => match Message::from_bytes(&bytes)? {
            Message::Error(e) => Err(NetError::Remote(e)),
            m => Ok(Some(m)),
        },
    }
}

pub(crate) fn error_reply(e: impl std::fmt::Display) -> Option<Vec<u8>> {
    Some(Message::Error(e.to_string()).to_bytes())
}
