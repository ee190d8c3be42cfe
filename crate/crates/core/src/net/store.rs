use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use crate::abe::{self, AttributeSet};
use crate::codec::{Reader, Writer};

use super::{NetError, PublisherPolicy};

const STORE_MAGIC: &[u8; 4] = b"LQST";
const KEY_MAGIC: &[u8; 4] = b"LQKY";
const VERSION: u8 = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserRecord {
    pub user: String,
    pub attributes: AttributeSet,
    pub key: abe::SecretKey,
    pub policy: Option<PublisherPolicy>,
}

impl UserRecord {
    fn write(&self, w: &mut Writer) {
        w.string(&self.user).u32(self.attributes.len() as u32);
        for a in &self.attributes {
            w.string(a);
        }
        w.prefixed(&self.key.to_bytes());
        match &self.policy {
            Some(p) => {
                w.u8(1);
                p.write(w);
            }
            None => {
                w.u8(0);
            }
        }
    }

    fn read(r: &mut Reader<'_>) -> Result<Self, NetError> {
        let user = r.string()?;
        let n = r.u32()? as usize;
        if n > r.remaining() {
            return Err(NetError::Store(format!("{n} attributes in a truncated record")));
        }
        let attributes = (0..n).map(|_| r.string()).collect::<Result<_, _>>()?;
        let key = abe::SecretKey::from_bytes(r.prefixed()?)?;
        let policy = match r.u8()? {
            0 => None,
            1 => Some(PublisherPolicy::read(r)?),
            f => return Err(NetError::Store(format!("bad policy flag {f}"))),
        };
        Ok(UserRecord {
            user,
            attributes,
            key,
            policy,
        })
    }
}

/// Everything the service provider persists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Store {
    pub pk: abe::PublicKey,
    pub mk: abe::MasterKey,
    pub users: BTreeMap<String, UserRecord>,
}

fn check_header(r: &mut Reader<'_>, magic: &[u8; 4]) -> Result<(), NetError> {
    if r.take(4).map_err(|_| NetError::Store("file too short".into()))? != magic {
        return Err(NetError::Store("bad magic".into()));
    }
    match r.u8()? {
        VERSION => Ok(()),
        v => Err(NetError::Store(format!("unsupported version {v}"))),
    }
}

impl Store {
    /// Magic, version, both keys, then one length-prefixed record per user
    /// in id order.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.raw(STORE_MAGIC).u8(VERSION);
        w.prefixed(&self.pk.to_bytes()).prefixed(&self.mk.to_bytes());
        w.u32(self.users.len() as u32);
        for rec in self.users.values() {
            let mut rw = Writer::new();
            rec.write(&mut rw);
            w.prefixed(&rw.finish());
        }
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, NetError> {
        let mut r = Reader::new(bytes);
        check_header(&mut r, STORE_MAGIC)?;
        let pk = abe::PublicKey::from_bytes(r.prefixed()?)?;
        let mk = abe::MasterKey::from_bytes(r.prefixed()?)?;
        let n = r.u32()?;
        let mut users = BTreeMap::new();
        for _ in 0..n {
            let mut rr = Reader::new(r.prefixed()?);
            let rec = UserRecord::read(&mut rr)?;
            rr.finish()?;
            if users.insert(rec.user.clone(), rec).is_some() {
                return Err(NetError::Store("duplicate user record".into()));
            }
        }
        r.finish()?;
        Ok(Store { pk, mk, users })
    }

    pub fn save(&self, path: &Path) -> Result<(), NetError> {
        write_atomic(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self, NetError> {
        Self::from_bytes(&fs::read(path)?)
    }
}

/// A user's credentials: the system public key and their own ABE key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyFile {
    pub user: String,
    pub pk: abe::PublicKey,
    pub sk: abe::SecretKey,
}

impl KeyFile {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.raw(KEY_MAGIC).u8(VERSION).string(&self.user);
        w.prefixed(&self.pk.to_bytes()).prefixed(&self.sk.to_bytes());
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, NetError> {
        let mut r = Reader::new(bytes);
        check_header(&mut r, KEY_MAGIC)?;
        let user = r.string()?;
        let pk = abe::PublicKey::from_bytes(r.prefixed()?)?;
        let sk = abe::SecretKey::from_bytes(r.prefixed()?)?;
        r.finish()?;
        Ok(KeyFile { user, pk, sk })
    }

    pub fn save(&self, path: &Path) -> Result<(), NetError> {
        write_atomic(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self, NetError> {
        Self::from_bytes(&fs::read(path)?)
    }
}

/// Writes next to `path` and renames over it, so a crash never leaves a
/// half-written file.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), NetError> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = Path::new(&tmp);
    {
        let mut f = fs::File::create(tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(tmp, path)?;
    Ok(())
}
