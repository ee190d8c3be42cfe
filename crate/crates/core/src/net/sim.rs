use std::collections::BTreeMap;
use std::sync::Arc;

use crate::geo::Location;

use super::{decode_frame, encode_frame, Handler, NetError, Transport};

/// One request frame and the reply frame, if any, as they crossed the wire.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Exchange {
    pub to: String,
    pub request: Vec<u8>,
    pub reply: Option<Vec<u8>>,
}

/// In-process network: named handlers and a transcript of every frame.
#[derive(Default)]
pub struct SimNetwork {
    peers: BTreeMap<String, Arc<dyn Handler>>,
    transcript: Vec<Exchange>,
}

impl SimNetwork {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, handler: Arc<dyn Handler>) {
        self.peers.insert(name.into(), handler);
    }

    pub fn link(&mut self, to: &str) -> SimLink<'_> {
        SimLink {
            net: self,
            to: to.to_string(),
        }
    }

    pub fn transcript(&self) -> &[Exchange] {
        &self.transcript
    }

    pub fn bytes_sent_to(&self, to: &str) -> usize {
        self.transcript
            .iter()
            .filter(|e| e.to == to)
            .map(|e| e.request.len())
            .sum()
    }

    /// Does `needle` appear in any frame?
    pub fn contains(&self, needle: &[u8]) -> bool {
        !needle.is_empty()
            && self.transcript.iter().any(|e| {
                std::iter::once(&e.request)
                    .chain(e.reply.as_ref())
                    .any(|f| f.windows(needle.len()).any(|w| w == needle))
            })
    }

    /// Looks for plaintext encodings of `loc` in the transcript: the packed
    /// coordinate block, and each coordinate on its own when it is large
    /// enough not to match by chance.
    pub fn leaks_location(&self, loc: &Location) -> bool {
        if self.contains(&loc.to_bytes()) {
            return true;
        }
        loc.coords()
            .iter()
            .filter(|c| c.unsigned_abs() >= 1 << 16)
            .any(|c| self.contains(&c.to_be_bytes()))
    }

    fn exchange(&mut self, to: &str, msg: &[u8]) -> Result<Option<Vec<u8>>, NetError> {
        let handler = self
            .peers
            .get(to)
            .cloned()
            .ok_or_else(|| NetError::UnknownPeer(to.to_string()))?;
        let request = encode_frame(msg);
        let reply = handler.handle(&decode_frame(&request)?).map(|r| encode_frame(&r));
        let out = reply.as_deref().map(decode_frame).transpose()?;
        self.transcript.push(Exchange {
            to: to.to_string(),
            request,
            reply,
        });
        Ok(out)
    }
}

/// A [`Transport`] to one named peer of a [`SimNetwork`].
pub struct SimLink<'a> {
    net: &'a mut SimNetwork,
    to: String,
}

impl Transport for SimLink<'_> {
    fn exchange(&mut self, msg: &[u8]) -> Result<Option<Vec<u8>>, NetError> {
        self.net.exchange(&self.to, msg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Echo;

    impl Handler for Echo {
        fn handle(&self, msg: &[u8]) -> Option<Vec<u8>> {
            (!msg.is_empty()).then(|| msg.to_vec())
        }
    }

    #[test]
    fn records_frames() {
        let mut net = SimNetwork::new();
        net.add("echo", Arc::new(Echo));
        assert_eq!(net.link("echo").exchange(b"hi").unwrap().unwrap(), b"hi");
        assert_eq!(net.link("echo").exchange(b"").unwrap(), None);
        assert!(net.link("nobody").exchange(b"x").is_err());
        assert_eq!(net.transcript().len(), 2);
        assert_eq!(net.transcript()[0].request, encode_frame(b"hi"));
        assert_eq!(net.bytes_sent_to("echo"), 7 + 5);
        assert!(net.contains(b"hi") && !net.contains(b"ho"));
    }

    #[test]
    fn scanner_finds_planted_coordinates() {
        let loc = Location::space(1_234_567, -7_654_321, 12).unwrap();
        let mut net = SimNetwork::new();
        net.add("echo", Arc::new(Echo));
        net.link("echo").exchange(b"nothing here").unwrap();
        assert!(!net.leaks_location(&loc));
        net.link("echo").exchange(&(-7_654_321i64).to_be_bytes()).unwrap();
        assert!(net.leaks_location(&loc));
    }
}
