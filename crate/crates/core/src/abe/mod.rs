//! Ciphertext-policy attribute-based encryption over BLS12-381 with
//! threshold-gate access trees and an authenticated symmetric payload.

mod scheme;
mod tree;

use thiserror::Error;

use crate::codec::DecodeError;

pub use scheme::{
    decrypt, encrypt, keygen, setup, Ciphertext, MasterKey, PublicKey, SecretKey, MAX_PAYLOAD,
};
pub use tree::{attributes, tree_satisfied, AccessTree, AttributeSet, Node};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AbeError {
    #[error("invalid access tree: {0}")]
    InvalidTree(String),
    #[error("attribute set must be non-empty")]
    EmptyAttributes,
    #[error("invalid attribute {0:?}")]
    InvalidAttribute(String),
    #[error("duplicate attribute {0:?}")]
    DuplicateAttribute(String),
    #[error("attributes do not satisfy the access tree")]
    NotSatisfied,
    #[error("ciphertext integrity check failed")]
    Integrity,
    #[error("payload of {0} bytes exceeds the limit")]
    PayloadTooLarge(usize),
    #[error("invalid group element: {0}")]
    Group(String),
    #[error(transparent)]
    Decode(#[from] DecodeError),
}
