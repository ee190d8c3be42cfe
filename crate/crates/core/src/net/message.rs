use crate::abe;
use crate::codec::{DecodeError, Reader, Writer};
use crate::protocol::{Level, NestedResponse, QueryMessage, MSG_QUERY, MSG_RESPONSE};

use super::NetError;

const MSG_REGISTER: u8 = 0x10;
const MSG_REGISTER_OK: u8 = 0x11;
const MSG_FETCH_PK: u8 = 0x12;
const MSG_PUBLIC_KEY: u8 = 0x13;
const MSG_ERROR: u8 = 0x14;
const MSG_DIRECTORY_LOOKUP: u8 = 0x15;
const MSG_DIRECTORY: u8 = 0x16;

/// Everything that travels inside a frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Message {
    Query(QueryMessage),
    Response(NestedResponse),
    Register { user: String, attributes: Vec<String> },
    RegisterOk(Box<abe::SecretKey>),
    FetchPublicKey,
    PublicKey(Box<abe::PublicKey>),
    Error(String),
    DirectoryLookup { publisher: String },
    /// Which levels a publisher answers, as a bitmask (bit `L-1` for level `L`).
    Directory { publisher: String, levels: u8 },
}

impl Message {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        match self {
            Message::Query(q) => return q.to_bytes(),
            Message::Response(r) => return r.to_bytes(),
            Message::Register { user, attributes } => {
                w.u8(MSG_REGISTER).string(user).u32(attributes.len() as u32);
                for a in attributes {
                    w.string(a);
                }
            }
            Message::RegisterOk(sk) => {
                w.u8(MSG_REGISTER_OK).prefixed(&sk.to_bytes());
            }
            Message::FetchPublicKey => {
                w.u8(MSG_FETCH_PK);
            }
            Message::PublicKey(pk) => {
                w.u8(MSG_PUBLIC_KEY).prefixed(&pk.to_bytes());
            }
            Message::Error(e) => {
                w.u8(MSG_ERROR).string(e);
            }
            Message::DirectoryLookup { publisher } => {
                w.u8(MSG_DIRECTORY_LOOKUP).string(publisher);
            }
            Message::Directory { publisher, levels } => {
                w.u8(MSG_DIRECTORY).string(publisher).u8(*levels);
            }
        }
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, NetError> {
        let kind = *bytes.first().ok_or(NetError::Malformed("empty message".into()))?;
        match kind {
            MSG_QUERY => return Ok(Message::Query(QueryMessage::from_bytes(bytes)?)),
            MSG_RESPONSE => return Ok(Message::Response(NestedResponse::from_bytes(bytes)?)),
            _ => {}
        }
        let mut r = Reader::new(&bytes[1..]);
        let msg = match kind {
            MSG_REGISTER => {
                let user = r.string()?;
                let n = r.u32()? as usize;
                if n > 4096 {
                    return Err(NetError::Malformed(format!("{n} attributes")));
                }
                let attributes = (0..n).map(|_| r.string()).collect::<Result<_, _>>()?;
                Message::Register { user, attributes }
            }
            MSG_REGISTER_OK => Message::RegisterOk(Box::new(abe::SecretKey::from_bytes(r.prefixed()?)?)),
            MSG_FETCH_PK => Message::FetchPublicKey,
            MSG_PUBLIC_KEY => Message::PublicKey(Box::new(abe::PublicKey::from_bytes(r.prefixed()?)?)),
            MSG_ERROR => Message::Error(r.string()?),
            MSG_DIRECTORY_LOOKUP => Message::DirectoryLookup { publisher: r.string()? },
            MSG_DIRECTORY => Message::Directory {
                publisher: r.string()?,
                levels: r.u8()?,
            },
            other => return Err(DecodeError::invalid(format!("unknown message type {other:#04x}")).into()),
        };
        r.finish()?;
        Ok(msg)
    }
}

/// Bitmask of enabled levels.
pub fn levels_mask(levels: impl IntoIterator<Item = Level>) -> u8 {
    levels.into_iter().fold(0, |m, l| m | 1 << (l.as_u8() - 1))
}

pub fn mask_has(mask: u8, level: Level) -> bool {
    mask & (1 << (level.as_u8() - 1)) != 0
}
