//! Python bindings: geometry helpers, Paillier, policy parsing, an
//! in-process deployment (service provider + peers on a simulated network),
//! and the command line.

use std::collections::HashMap;
use std::sync::Arc;

use num_bigint::{BigInt, BigUint};
use pyo3::exceptions::{PyKeyError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use locquery::geo::{self, Location, SpaceConfig};
use locquery::net::{Handler, PublisherPeer, PublisherPolicy, Querier, ServiceProvider, SimNetwork};
use locquery::paillier;
use locquery::protocol::{DisclosureFunction, KeySource, Level, QueryResult};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_err(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

fn rng_from(seed: Option<u64>) -> ChaCha20Rng {
    seed.map_or_else(ChaCha20Rng::from_entropy, ChaCha20Rng::seed_from_u64)
}

fn to_location(coords: Vec<i64>) -> PyResult<Location> {
    Location::new(coords).map_err(value_err)
}

/// Exact squared distance between two grid points.
#[pyfunction]
fn euclid_dist_sq(a: Vec<i64>, b: Vec<i64>) -> PyResult<u128> {
    geo::euclid_dist_sq(&to_location(a)?, &to_location(b)?).map_err(value_err)
}

/// Geodetic degrees and altitude to the 3D meter grid.
#[pyfunction]
#[pyo3(signature = (lat, lon, alt=0.0))]
fn to_grid(lat: f64, lon: f64, alt: f64) -> PyResult<Vec<i64>> {
    Ok(geo::to_grid(lat, lon, alt, &SpaceConfig::earth(3))
        .map_err(value_err)?
        .coords()
        .to_vec())
}

/// Parses a policy such as `or(friend, atleast(2, a, b, c))` and returns
/// its normalized form.
#[pyfunction]
fn parse_policy(expr: &str) -> PyResult<String> {
    Ok(locquery::cli::parse_tree(expr).map_err(value_err)?.to_string())
}

/// Runs the command line in-process; returns `(exit_code, stdout)`.
#[pyfunction]
fn run_cli(args: Vec<String>) -> (i32, String) {
    let mut out = Vec::new();
    let code = locquery::cli::run(std::iter::once("locquery".to_string()).chain(args), &mut out);
    (code, String::from_utf8_lossy(&out).into_owned())
}

/// A Paillier keypair. Ciphertexts cross the boundary as bytes.
#[pyclass(module = "locquery_py")]
struct Paillier {
    kp: paillier::Keypair,
    rng: ChaCha20Rng,
}

#[pymethods]
impl Paillier {
    #[new]
    #[pyo3(signature = (bits=1024, seed=None))]
    fn new(bits: u32, seed: Option<u64>) -> PyResult<Self> {
        let mut rng = rng_from(seed);
        let kp = paillier::Keypair::generate(bits, &mut rng).map_err(value_err)?;
        Ok(Paillier { kp, rng })
    }

    #[getter]
    fn n(&self) -> BigUint {
        self.kp.public().n().clone()
    }

    fn encrypt(&mut self, m: BigUint) -> PyResult<Vec<u8>> {
        Ok(self.kp.encrypt(&m, &mut self.rng).map_err(value_err)?.to_bytes())
    }

    fn decrypt(&self, ct: Vec<u8>) -> PyResult<BigUint> {
        self.kp.decrypt(&self.ciphertext(&ct)?).map_err(value_err)
    }

    fn add(&self, a: Vec<u8>, b: Vec<u8>) -> PyResult<Vec<u8>> {
        let pk = self.kp.public();
        Ok(pk
            .add(&self.ciphertext(&a)?, &self.ciphertext(&b)?)
            .map_err(value_err)?
            .to_bytes())
    }

    fn scalar_mul(&self, a: Vec<u8>, k: BigInt) -> PyResult<Vec<u8>> {
        let pk = self.kp.public();
        Ok(pk.scalar_mul(&self.ciphertext(&a)?, &k).map_err(value_err)?.to_bytes())
    }
}

impl Paillier {
    fn ciphertext(&self, bytes: &[u8]) -> PyResult<paillier::Ciphertext> {
        self.kp.public().ciphertext_from_bytes(bytes).map_err(value_err)
    }
}

/// A whole deployment in one process: the service provider, publishers and
/// queriers, talking over a simulated network.
#[pyclass(module = "locquery_py")]
struct Deployment {
    sp: Arc<ServiceProvider>,
    net: SimNetwork,
    publishers: HashMap<String, Arc<PublisherPeer>>,
    queriers: HashMap<String, Querier>,
    keys: KeySource,
    rng: ChaCha20Rng,
}

#[pymethods]
impl Deployment {
    /// `key_bits` sizes the queriers' Paillier keys; with `cache_keys` each
    /// querier reuses one keypair across queries.
    #[new]
    #[pyo3(signature = (seed=None, key_bits=1024, cache_keys=true))]
    fn new(seed: Option<u64>, key_bits: u32, cache_keys: bool) -> PyResult<Self> {
        let mut rng = rng_from(seed);
        let sp = Arc::new(ServiceProvider::new(&mut rng));
        let keys = if cache_keys {
            KeySource::Cached(Arc::new(
                paillier::Keypair::generate(key_bits, &mut rng).map_err(value_err)?,
            ))
        } else {
            KeySource::Ephemeral { bits: key_bits }
        };
        let mut net = SimNetwork::new();
        net.add("sp", Arc::clone(&sp) as Arc<dyn Handler>);
        Ok(Deployment {
            sp,
            net,
            publishers: HashMap::new(),
            queriers: HashMap::new(),
            keys,
            rng,
        })
    }

    fn register(&mut self, user: &str, attributes: Vec<String>) -> PyResult<()> {
        let sk = self.sp.register(user, &attributes).map_err(value_err)?;
        let q = Querier::new(
            user,
            self.sp.public_key().clone(),
            sk,
            SpaceConfig::earth(3),
            self.keys.clone(),
            ChaCha20Rng::from_rng(&mut self.rng).map_err(runtime_err)?,
        );
        self.queriers.insert(user.to_string(), q);
        Ok(())
    }

    /// Starts answering for `user`. `policies` maps a level (1-4) to a
    /// policy expression; levels left out are disabled.
    #[pyo3(signature = (user, location, policies, tau=None, disclosure="exact", guard=false))]
    fn publish(
        &mut self,
        user: &str,
        location: Vec<i64>,
        policies: HashMap<u8, String>,
        tau: Option<u64>,
        disclosure: &str,
        guard: bool,
    ) -> PyResult<()> {
        if self.sp.user(user).is_none() {
            return Err(PyKeyError::new_err(format!("{user} is not registered")));
        }
        let mut policy = PublisherPolicy {
            tau,
            disclosure: disclosure.parse::<DisclosureFunction>().map_err(value_err)?,
            ..Default::default()
        };
        for (level, expr) in policies {
            let level = Level::from_u8(level).map_err(value_err)?;
            policy = policy.with_tree(level, locquery::cli::parse_tree(&expr).map_err(value_err)?);
        }
        self.sp.set_policy(user, policy.clone()).map_err(value_err)?;
        let rng = ChaCha20Rng::from_rng(&mut self.rng).map_err(runtime_err)?;
        let peer = PublisherPeer::new(user, self.sp.public_key().clone(), policy, to_location(location)?, rng)
            .map_err(value_err)?;
        let peer = Arc::new(if guard { peer.with_guard() } else { peer });
        self.net.add(user, Arc::clone(&peer) as Arc<dyn Handler>);
        self.publishers.insert(user.to_string(), peer);
        Ok(())
    }

    /// Moves a publisher (this opens a new guard epoch).
    fn move_to(&self, user: &str, location: Vec<i64>) -> PyResult<()> {
        self.publishers
            .get(user)
            .ok_or_else(|| PyKeyError::new_err(user.to_string()))?
            .publish(to_location(location)?)
            .map_err(value_err)
    }

    /// Returns a dict with `kind` one of `location`, `distance`,
    /// `comparison`, `blocked` (silent publisher) or `denied` (policy not
    /// satisfied), and the matching `value`.
    #[pyo3(signature = (querier, publisher, level, location, tau=None))]
    fn query<'py>(
        &mut self,
        py: Python<'py>,
        querier: &str,
        publisher: &str,
        level: u8,
        location: Vec<i64>,
        tau: Option<u64>,
    ) -> PyResult<Bound<'py, PyDict>> {
        let level = Level::from_u8(level).map_err(value_err)?;
        let from = to_location(location)?;
        let q = self
            .queriers
            .get_mut(querier)
            .ok_or_else(|| PyKeyError::new_err(querier.to_string()))?;
        let out = PyDict::new(py);
        out.set_item("level", level.as_u8())?;
        match q.query(&mut self.net.link(publisher), level, &from, tau) {
            Ok(Some(QueryResult::Location(l))) => {
                out.set_item("kind", "location")?;
                out.set_item("value", l.coords().to_vec())?;
            }
            Ok(Some(QueryResult::Distance { squared, meters })) => {
                out.set_item("kind", "distance")?;
                out.set_item("value", squared)?;
                out.set_item("meters", meters)?;
            }
            Ok(Some(QueryResult::Comparison(t))) => {
                out.set_item("kind", "comparison")?;
                out.set_item("value", t.to_string())?;
            }
            Ok(None) => {
                out.set_item("kind", "blocked")?;
                out.set_item("value", py.None())?;
            }
            Err(locquery::net::NetError::Protocol(e)) if e.is_unsatisfied() => {
                out.set_item("kind", "denied")?;
                out.set_item("value", py.None())?;
            }
            Err(e) => return Err(runtime_err(e)),
        }
        Ok(out)
    }

    /// Enabled-levels bitmask the service provider lists for `publisher`.
    fn directory(&self, publisher: &str) -> PyResult<u8> {
        self.sp.directory(publisher).map_err(value_err)
    }

    /// Total frame bytes sent to a peer so far.
    fn bytes_sent_to(&self, peer: &str) -> usize {
        self.net.bytes_sent_to(peer)
    }

    /// True if any frame so far carries `location` in the clear.
    fn leaks(&self, location: Vec<i64>) -> PyResult<bool> {
        Ok(self.net.leaks_location(&to_location(location)?))
    }
}

#[pymodule]
pub fn locquery_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(euclid_dist_sq, m)?)?;
    m.add_function(wrap_pyfunction!(to_grid, m)?)?;
    m.add_function(wrap_pyfunction!(parse_policy, m)?)?;
    m.add_function(wrap_pyfunction!(run_cli, m)?)?;
    m.add_class::<Paillier>()?;
    m.add_class::<Deployment>()?;
    Ok(())
}
