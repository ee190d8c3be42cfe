pub mod abe;
pub mod cli;
pub mod codec;
pub mod geo;
pub mod inference;
pub mod net;
pub mod paillier;
pub mod protocol;
