use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::sync::Mutex;

use rand::{CryptoRng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::abe::{self, attributes};

use super::{call, error_reply, Handler, Message, NetError, PublisherPolicy, Store, Transport, UserRecord};

/// Holds the ABE master key, issues user keys and answers directory lookups.
pub struct ServiceProvider {
    pk: abe::PublicKey,
    mk: abe::MasterKey,
    users: Mutex<BTreeMap<String, UserRecord>>,
    rng: Mutex<ChaCha20Rng>,
}

impl ServiceProvider {
    pub fn new<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        let (pk, mk) = abe::setup(rng);
        Self::from_store(
            Store {
                pk,
                mk,
                users: BTreeMap::new(),
            },
            rng,
        )
    }

    /// Resumes from a saved store; `rng` seeds key issuance.
    pub fn from_store<R: RngCore + CryptoRng>(store: Store, rng: &mut R) -> Self {
        ServiceProvider {
            pk: store.pk,
            mk: store.mk,
            users: Mutex::new(store.users),
            rng: Mutex::new(ChaCha20Rng::from_rng(rng).expect("seeding from a CSPRNG")),
        }
    }

    pub fn public_key(&self) -> &abe::PublicKey {
        &self.pk
    }

    /// Issues a key for `user`; each user id can register once.
    pub fn register(&self, user: &str, attrs: &[String]) -> Result<abe::SecretKey, NetError> {
        if user.is_empty() {
            return Err(NetError::Malformed("empty user id".into()));
        }
        if self.users.lock().unwrap().contains_key(user) {
            return Err(NetError::Duplicate(user.to_string()));
        }
        let key = {
            let mut rng = self.rng.lock().unwrap();
            abe::keygen(&self.pk, &self.mk, attrs.iter(), &mut *rng)?
        };
        // re-checked under the lock: another registration may have won
        match self.users.lock().unwrap().entry(user.to_string()) {
            Entry::Occupied(_) => Err(NetError::Duplicate(user.to_string())),
            Entry::Vacant(v) => {
                v.insert(UserRecord {
                    user: user.to_string(),
                    attributes: attributes(attrs.iter().map(String::as_str)),
                    key: key.clone(),
                    policy: None,
                });
                Ok(key)
            }
        }
    }

    pub fn user(&self, user: &str) -> Option<UserRecord> {
        self.users.lock().unwrap().get(user).cloned()
    }

    pub fn user_count(&self) -> usize {
        self.users.lock().unwrap().len()
    }

    /// Records which levels a registered publisher answers, and how.
    pub fn set_policy(&self, user: &str, policy: PublisherPolicy) -> Result<(), NetError> {
        let mut users = self.users.lock().unwrap();
        let rec = users.get_mut(user).ok_or_else(|| NetError::UnknownUser(user.to_string()))?;
        rec.policy = Some(policy);
        Ok(())
    }

    /// Enabled-levels bitmask of a publisher (0 if it published no policy).
    pub fn directory(&self, publisher: &str) -> Result<u8, NetError> {
        let users = self.users.lock().unwrap();
        let rec = users
            .get(publisher)
            .ok_or_else(|| NetError::UnknownUser(publisher.to_string()))?;
        Ok(rec.policy.as_ref().map_or(0, PublisherPolicy::levels_mask))
    }

    pub fn snapshot(&self) -> Store {
        Store {
            pk: self.pk.clone(),
            mk: self.mk.clone(),
            users: self.users.lock().unwrap().clone(),
        }
    }
}

impl Handler for ServiceProvider {
    fn handle(&self, msg: &[u8]) -> Option<Vec<u8>> {
        let msg = match Message::from_bytes(msg) {
            Ok(m) => m,
            Err(e) => return error_reply(e),
        };
        let reply = match msg {
            Message::Register { user, attributes } => match self.register(&user, &attributes) {
                Ok(sk) => Message::RegisterOk(Box::new(sk)),
                Err(e) => Message::Error(e.to_string()),
            },
            Message::FetchPublicKey => Message::PublicKey(Box::new(self.pk.clone())),
            Message::DirectoryLookup { publisher } => match self.directory(&publisher) {
                Ok(levels) => Message::Directory { publisher, levels },
                Err(e) => Message::Error(e.to_string()),
            },
            _ => Message::Error("the service provider does not answer this message".into()),
        };
        Some(reply.to_bytes())
    }
}

pub fn register_remote<T: Transport + ?Sized>(
    t: &mut T,
    user: &str,
    attrs: &[String],
) -> Result<abe::SecretKey, NetError> {
    let msg = Message::Register {
        user: user.to_string(),
        attributes: attrs.to_vec(),
    };
    match call(t, &msg)? {
        Some(Message::RegisterOk(sk)) => Ok(*sk),
        _ => Err(NetError::Unexpected("a registered key")),
    }
}

pub fn fetch_public_key<T: Transport + ?Sized>(t: &mut T) -> Result<abe::PublicKey, NetError> {
    match call(t, &Message::FetchPublicKey)? {
        Some(Message::PublicKey(pk)) => Ok(*pk),
        _ => Err(NetError::Unexpected("a public key")),
    }
}

pub fn lookup_directory<T: Transport + ?Sized>(t: &mut T, publisher: &str) -> Result<u8, NetError> {
    let msg = Message::DirectoryLookup {
        publisher: publisher.to_string(),
    };
    match call(t, &msg)? {
        Some(Message::Directory { levels, .. }) => Ok(levels),
        _ => Err(NetError::Unexpected("a directory entry")),
    }
}
