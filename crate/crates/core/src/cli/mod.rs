//! The `locquery` command line: service provider, publisher and querier
//! roles over TCP, plus offline attack simulations and benchmarks.
//!
//! Output is `key=value` lines, followed by an aligned table where one
//! applies. Exit codes: 0 success, 1 error, 2 usage, 3 query blocked.

mod tree;

use std::io::Write;
use std::net::TcpListener;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

use crate::abe::{self, AbeError, AccessTree, Node};
use crate::geo::{euclid_dist_sq, GeoError, Location, SpaceConfig, COORD_LIMIT};
use crate::inference::{
    attack_level1_inside, attack_level2, attack_level3, expected_level1_outside_queries, monte_carlo_first_hit,
    InferenceError, ProtocolOracle, QueryOracle, SimulatedPublisher,
};
use crate::net::{
    self, Handler, KeyFile, Message, NetError, PublisherPeer, PublisherPolicy, Querier, ServiceProvider, Store,
    TcpTransport,
};
use crate::paillier::{Keypair, PaillierError};
use crate::protocol::{
    p_respond, q_begin, q_finish, DisclosureFunction, KeySource, Level, ProtocolError, QueryMessage, QueryResult,
};

pub use tree::{parse_tree, TreeParseError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_BLOCKED: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Tree(#[from] TreeParseError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Inference(#[from] InferenceError),
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error(transparent)]
    Paillier(#[from] PaillierError),
    #[error(transparent)]
    Abe(#[from] AbeError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Parser)]
#[command(name = "locquery", version, about = "Leveled private location queries")]
pub struct Cli {
    /// Seed every random choice (default: OS entropy).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Create a service-provider store with fresh ABE keys.
    SpInit {
        #[arg(long)]
        store: PathBuf,
        /// Overwrite an existing store.
        #[arg(long)]
        force: bool,
    },
    /// Serve registrations, public-key fetches and directory lookups.
    SpServe {
        #[arg(long)]
        store: PathBuf,
        #[arg(long, default_value = "127.0.0.1:7400")]
        listen: String,
        /// Exit after this many connections.
        #[arg(long)]
        connections: Option<usize>,
    },
    /// Obtain an ABE key for a set of attributes.
    Register {
        #[arg(long)]
        user: String,
        #[arg(long, value_delimiter = ',', required = true)]
        attrs: Vec<String>,
        /// Issue locally from a store file.
        #[arg(long, conflicts_with = "sp", required_unless_present = "sp")]
        store: Option<PathBuf>,
        /// Register with a running service provider.
        #[arg(long)]
        sp: Option<String>,
        /// Where to write the key file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a publisher that answers queries about its location.
    Publish {
        #[arg(long)]
        key: PathBuf,
        /// `x,y` or `x,y,z` grid coordinates in meters.
        #[arg(long, allow_hyphen_values = true)]
        location: String,
        /// `LEVEL=POLICY`, e.g. `3=or(friend,family)`; repeat per level.
        #[arg(long = "tree", value_name = "LEVEL=POLICY", required = true)]
        trees: Vec<String>,
        /// Level-1 threshold in meters.
        #[arg(long)]
        tau: Option<u64>,
        /// `exact` or `quantize:CELL`.
        #[arg(long, default_value = "exact")]
        disclosure: String,
        /// Enforce per-epoch query limits.
        #[arg(long)]
        guard: bool,
        #[arg(long, default_value = "127.0.0.1:7401")]
        listen: String,
        #[arg(long)]
        connections: Option<usize>,
        /// Also record the policy in this service-provider store.
        #[arg(long)]
        store: Option<PathBuf>,
    },
    /// Query a publisher.
    Query {
        #[arg(long)]
        key: PathBuf,
        /// Publisher address.
        #[arg(long)]
        publisher: String,
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=4))]
        level: u8,
        /// The querier's own location.
        #[arg(long, allow_hyphen_values = true)]
        location: String,
        /// Level-2 threshold in meters.
        #[arg(long)]
        tau: Option<u64>,
        #[arg(long, default_value_t = 1024)]
        key_bits: u32,
    },
    /// Simulate an inference attack and report its success.
    Attack {
        #[arg(long, value_enum)]
        theorem: Theorem,
        #[arg(long, default_value_t = 10)]
        trials: usize,
        /// Put the publisher behind the query guard.
        #[arg(long)]
        guard: bool,
        #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u8).range(2..=3))]
        dim: u8,
        #[arg(long, default_value_t = 100)]
        tau: u64,
        /// Grid side length for the outside estimate.
        #[arg(long, default_value_t = 1000)]
        extent: u64,
        /// Run every query through the encrypted protocol.
        #[arg(long)]
        crypto: bool,
    },
    /// Time one query end to end.
    Bench {
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=4))]
        level: u8,
        #[arg(long, default_value_t = 5)]
        iters: usize,
        /// Leaves of the (all-of) access tree.
        #[arg(long, default_value_t = 10)]
        leaves: usize,
        #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u8).range(2..=3))]
        dim: u8,
        #[arg(long, default_value_t = 1024)]
        key_bits: u32,
        /// Reuse one Paillier keypair instead of generating one per query.
        #[arg(long)]
        cached_key: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Theorem {
    /// Exact distance: d + 1 queries pin the location.
    L3,
    /// Querier threshold: binary search on the distance.
    L2,
    /// Publisher threshold, starting inside the region.
    L1in,
    /// Publisher threshold, starting outside: expected query count.
    L1out,
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = write!(out, "{e}");
            return code;
        }
    };
    match execute(cli, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(out, "error={e}");
            match e {
                CliError::Usage(_) | CliError::Tree(_) => EXIT_USAGE,
                _ => EXIT_ERROR,
            }
        }
    }
}

fn rng_from(seed: Option<u64>) -> ChaCha20Rng {
    match seed {
        Some(s) => ChaCha20Rng::seed_from_u64(s),
        None => ChaCha20Rng::from_entropy(),
    }
}

fn execute(cli: Cli, out: &mut dyn Write) -> Result<i32, CliError> {
    let mut rng = rng_from(cli.seed);
    match cli.command {
        Command::SpInit { store, force } => {
            if store.exists() && !force {
                return Err(CliError::Usage(format!("{} exists (use --force)", store.display())));
            }
            let sp = ServiceProvider::new(&mut rng);
            sp.snapshot().save(&store)?;
            writeln!(out, "store={}", store.display())?;
            writeln!(out, "users=0")?;
        }
        Command::SpServe {
            store,
            listen,
            connections,
        } => {
            let sp = ServiceProvider::from_store(Store::load(&store)?, &mut rng);
            let listener = TcpListener::bind(&listen)?;
            writeln!(out, "listening={}", listener.local_addr()?)?;
            writeln!(out, "users={}", sp.user_count())?;
            out.flush()?;
            let handler = Arc::new(PersistingSp {
                sp,
                path: store,
                lock: Mutex::new(()),
            });
            net::serve(listener, handler, connections)?;
        }
        Command::Register {
            user,
            attrs,
            store,
            sp,
            out: path,
        } => {
            let (pk, sk) = match (store, sp) {
                (Some(store), _) => {
                    let sp = ServiceProvider::from_store(Store::load(&store)?, &mut rng);
                    let sk = sp.register(&user, &attrs)?;
                    sp.snapshot().save(&store)?;
                    (sp.public_key().clone(), sk)
                }
                (None, Some(addr)) => {
                    let mut t = TcpTransport::new(addr.as_str())?;
                    let pk = net::fetch_public_key(&mut t)?;
                    (pk, net::register_remote(&mut t, &user, &attrs)?)
                }
                (None, None) => unreachable!("clap requires one of --store, --sp"),
            };
            KeyFile {
                user: user.clone(),
                pk,
                sk,
            }
            .save(&path)?;
            writeln!(out, "user={user}")?;
            writeln!(out, "attributes={}", attrs.join(","))?;
            writeln!(out, "key={}", path.display())?;
        }
        Command::Publish {
            key,
            location,
            trees,
            tau,
            disclosure,
            guard,
            listen,
            connections,
            store,
        } => {
            let kf = KeyFile::load(&key)?;
            let location: Location = location.parse()?;
            let mut policy = PublisherPolicy {
                tau,
                disclosure: disclosure
                    .parse::<DisclosureFunction>()
                    .map_err(|e| CliError::Usage(format!("--disclosure: {e}")))?,
                ..Default::default()
            };
            for spec in &trees {
                let (level, tree) = parse_level_tree(spec)?;
                policy = policy.with_tree(level, tree);
            }
            policy.validate()?;
            if let Some(path) = store {
                let mut s = Store::load(&path)?;
                let rec = s
                    .users
                    .get_mut(&kf.user)
                    .ok_or_else(|| NetError::UnknownUser(kf.user.clone()))?;
                rec.policy = Some(policy.clone());
                s.save(&path)?;
            }
            let levels = policy.levels_mask();
            let peer_rng = ChaCha20Rng::from_rng(&mut rng).expect("seeding from a CSPRNG");
            let mut peer = PublisherPeer::new(kf.user.clone(), kf.pk, policy, location, peer_rng)?;
            if guard {
                peer = peer.with_guard();
            }
            let listener = TcpListener::bind(&listen)?;
            writeln!(out, "listening={}", listener.local_addr()?)?;
            writeln!(out, "publisher={}", kf.user)?;
            writeln!(out, "levels={levels:04b}")?;
            writeln!(out, "guard={guard}")?;
            out.flush()?;
            net::serve(listener, Arc::new(peer), connections)?;
        }
        Command::Query {
            key,
            publisher,
            level,
            location,
            tau,
            key_bits,
        } => {
            let kf = KeyFile::load(&key)?;
            let level = Level::from_u8(level)?;
            let from: Location = location.parse()?;
            let querier_rng = ChaCha20Rng::from_rng(&mut rng).expect("seeding from a CSPRNG");
            let mut q = Querier::new(
                kf.user,
                kf.pk,
                kf.sk,
                SpaceConfig::earth(from.dim()),
                KeySource::Ephemeral { bits: key_bits },
                querier_rng,
            );
            let mut t = TcpTransport::new(publisher.as_str())?;
            writeln!(out, "level={}", level.as_u8())?;
            match q.query(&mut t, level, &from, tau) {
                Ok(Some(result)) => print_result(out, &result)?,
                Ok(None) => {
                    writeln!(out, "result=blocked")?;
                    return Ok(EXIT_BLOCKED);
                }
                Err(NetError::Protocol(e)) if e.is_unsatisfied() => {
                    writeln!(out, "result=blocked")?;
                    writeln!(out, "reason=access policy not satisfied")?;
                    return Ok(EXIT_BLOCKED);
                }
                Err(e) => return Err(e.into()),
            }
        }
        Command::Attack {
            theorem,
            trials,
            guard,
            dim,
            tau,
            extent,
            crypto,
        } => {
            if trials == 0 {
                return Err(CliError::Usage("--trials must be positive".into()));
            }
            let ctx = AttackCtx {
                guard,
                dim: dim as usize,
                tau,
                crypto,
            };
            match theorem {
                Theorem::L3 => attack_l3(&ctx, trials, &mut rng, out)?,
                Theorem::L2 => attack_l2(&ctx, trials, &mut rng, out)?,
                Theorem::L1in => attack_l1in(&ctx, trials, &mut rng, out)?,
                Theorem::L1out => attack_l1out(&ctx, trials, extent, &mut rng, out)?,
            }
        }
        Command::Bench {
            level,
            iters,
            leaves,
            dim,
            key_bits,
            cached_key,
        } => bench(
            Level::from_u8(level)?,
            iters,
            leaves,
            dim as usize,
            key_bits,
            cached_key,
            &mut rng,
            out,
        )?,
    }
    Ok(EXIT_OK)
}

fn parse_level_tree(spec: &str) -> Result<(Level, AccessTree), CliError> {
    let (level, policy) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("--tree {spec:?}: expected LEVEL=POLICY")))?;
    let level = level
        .trim()
        .parse::<u8>()
        .ok()
        .and_then(|l| Level::from_u8(l).ok())
        .ok_or_else(|| CliError::Usage(format!("--tree {spec:?}: level must be 1-4")))?;
    Ok((level, parse_tree(policy)?))
}

fn print_result(out: &mut dyn Write, result: &QueryResult) -> std::io::Result<()> {
    match result {
        QueryResult::Location(loc) => {
            writeln!(out, "result=location")?;
            writeln!(out, "location={loc}")
        }
        QueryResult::Distance { squared, meters } => {
            writeln!(out, "result=distance")?;
            writeln!(out, "dist_sq={squared}")?;
            writeln!(out, "meters={meters:.3}")
        }
        QueryResult::Comparison(t) => {
            writeln!(out, "result=comparison")?;
            writeln!(out, "outcome={t}")?;
            writeln!(out, "within={}", *t != crate::protocol::Trichotomy::Greater)
        }
    }
}

/// Service-provider handler that saves the store after each registration.
struct PersistingSp {
    sp: ServiceProvider,
    path: PathBuf,
    lock: Mutex<()>,
}

impl Handler for PersistingSp {
    fn handle(&self, msg: &[u8]) -> Option<Vec<u8>> {
        let reply = self.sp.handle(msg)?;
        if let Ok(Message::RegisterOk(_)) = Message::from_bytes(&reply) {
            let _g = self.lock.lock().unwrap();
            if let Err(e) = self.sp.snapshot().save(&self.path) {
                eprintln!("warning: could not save {}: {e}", self.path.display());
            }
        }
        Some(reply)
    }
}

fn table(out: &mut dyn Write, header: &[&str], rows: &[Vec<String>]) -> std::io::Result<()> {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let line = |cells: Vec<&str>| {
        cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect::<Vec<_>>()
            .join("  ")
            .trim_end()
            .to_string()
    };
    writeln!(out, "{}", line(header.to_vec()))?;
    for row in rows {
        writeln!(out, "{}", line(row.iter().map(String::as_str).collect()))?;
    }
    Ok(())
}

struct AttackCtx {
    guard: bool,
    dim: usize,
    tau: u64,
    crypto: bool,
}

/// A throwaway ABE system whose attacker key satisfies the publisher's tree.
struct CryptoFixture {
    abe_pk: abe::PublicKey,
    abe_sk: abe::SecretKey,
    tree: AccessTree,
    keys: KeySource,
}

impl CryptoFixture {
    fn new(rng: &mut ChaCha20Rng) -> Result<Self, CliError> {
        let (abe_pk, mk) = abe::setup(rng);
        let abe_sk = abe::keygen(&abe_pk, &mk, ["friend"], rng)?;
        let tree = AccessTree::new(Node::or(vec![Node::leaf("friend"), Node::leaf("family")]))?;
        let keys = KeySource::Cached(Arc::new(Keypair::generate(1024, rng)?));
        Ok(CryptoFixture {
            abe_pk,
            abe_sk,
            tree,
            keys,
        })
    }
}

impl AttackCtx {
    fn oracle(
        &self,
        location: Location,
        config: &SpaceConfig,
        fixture: Option<&CryptoFixture>,
        rng: &mut ChaCha20Rng,
    ) -> Box<dyn QueryOracle> {
        match fixture {
            Some(f) => {
                let o = ProtocolOracle::new(
                    config.clone(),
                    location,
                    self.tau,
                    f.tree.clone(),
                    f.abe_pk.clone(),
                    f.abe_sk.clone(),
                    f.keys.clone(),
                    ChaCha20Rng::from_rng(rng).expect("seeding from a CSPRNG"),
                );
                Box::new(if self.guard { o.with_guard() } else { o })
            }
            None if self.guard => Box::new(SimulatedPublisher::guarded(location, self.tau)),
            None => Box::new(SimulatedPublisher::new(location, self.tau)),
        }
    }

    fn fixture(&self, rng: &mut ChaCha20Rng) -> Result<Option<CryptoFixture>, CliError> {
        self.crypto.then(|| CryptoFixture::new(rng)).transpose()
    }

    fn header(&self, out: &mut dyn Write, theorem: &str, trials: usize) -> std::io::Result<()> {
        writeln!(out, "theorem={theorem}")?;
        writeln!(out, "dim={}", self.dim)?;
        writeln!(out, "trials={trials}")?;
        writeln!(out, "guard={}", self.guard)?;
        writeln!(out, "crypto={}", self.crypto)
    }
}

fn random_in(config: &SpaceConfig, rng: &mut ChaCha20Rng) -> Location {
    let coords = config.bounds().iter().map(|&(lo, hi)| rng.gen_range(lo..=hi)).collect();
    Location::new(coords).expect("config bounds lie on the grid")
}

fn attack_l3(ctx: &AttackCtx, trials: usize, rng: &mut ChaCha20Rng, out: &mut dyn Write) -> Result<(), CliError> {
    ctx.header(out, "l3", trials)?;
    let config = SpaceConfig::centered(ctx.dim, 1 << 20)?;
    let fixture = ctx.fixture(rng)?;
    let mut rows = Vec::new();
    let (mut recovered, mut max_queries, mut discarded) = (0, 0, 0);
    for i in 0..trials {
        let truth = random_in(&config, rng);
        let mut oracle = ctx.oracle(truth.clone(), &config, fixture.as_ref(), rng);
        let r = attack_level3(&mut *oracle, &config, rng, 16)?;
        let ok = r.recovered.as_ref() == Some(&truth);
        recovered += usize::from(ok);
        max_queries = max_queries.max(r.queries);
        discarded += oracle.log().discarded();
        rows.push(vec![
            i.to_string(),
            truth.to_string(),
            r.recovered.map_or("-".into(), |l| l.to_string()),
            r.queries.to_string(),
            oracle.log().discarded().to_string(),
            ok.to_string(),
        ]);
    }
    writeln!(out, "recovered={recovered}/{trials}")?;
    writeln!(out, "max_queries={max_queries}")?;
    writeln!(out, "discarded={discarded}")?;
    table(out, &["trial", "truth", "recovered", "queries", "discarded", "exact"], &rows)?;
    Ok(())
}

fn attack_l2(ctx: &AttackCtx, trials: usize, rng: &mut ChaCha20Rng, out: &mut dyn Write) -> Result<(), CliError> {
    ctx.header(out, "l2", trials)?;
    let config = SpaceConfig::earth(ctx.dim);
    let max_dist_sq = (COORD_LIMIT as u128).pow(2);
    let fixture = ctx.fixture(rng)?;
    let from = Location::origin(ctx.dim)?;
    let mut rows = Vec::new();
    let (mut exact, mut max_queries) = (0, 0);
    for i in 0..trials {
        // any publisher within 2^26 m of the querier at the origin
        let truth = loop {
            let coords = (0..ctx.dim).map(|_| rng.gen_range(-COORD_LIMIT..=COORD_LIMIT)).collect();
            let cand = Location::new(coords)?;
            if cand.norm_sq() <= max_dist_sq {
                break cand;
            }
        };
        let want = euclid_dist_sq(&truth, &from)?;
        let mut oracle = ctx.oracle(truth.clone(), &config, fixture.as_ref(), rng);
        let r = attack_level2(&mut *oracle, &from, max_dist_sq)?;
        let ok = r.dist_sq == Some(want);
        exact += usize::from(ok);
        max_queries = max_queries.max(r.queries);
        rows.push(vec![
            i.to_string(),
            want.to_string(),
            r.dist_sq.map_or(format!("[{}, {}]", r.lo, r.hi), |d| d.to_string()),
            r.queries.to_string(),
            ok.to_string(),
        ]);
    }
    writeln!(out, "exact={exact}/{trials}")?;
    writeln!(out, "max_queries={max_queries}")?;
    table(out, &["trial", "dist_sq", "found", "queries", "exact"], &rows)?;
    Ok(())
}

fn attack_l1in(ctx: &AttackCtx, trials: usize, rng: &mut ChaCha20Rng, out: &mut dyn Write) -> Result<(), CliError> {
    ctx.header(out, "l1in", trials)?;
    writeln!(out, "tau={}", ctx.tau)?;
    let config = SpaceConfig::centered(ctx.dim, 1 << 20)?;
    let fixture = ctx.fixture(rng)?;
    let tau = ctx.tau as i64;
    let mut rows = Vec::new();
    let (mut located, mut max_queries) = (0, 0);
    for i in 0..trials {
        let truth = random_in(&SpaceConfig::centered(ctx.dim, (1 << 20) - tau)?, rng);
        let start = loop {
            let coords = truth.coords().iter().map(|c| c + rng.gen_range(-tau..=tau)).collect();
            let cand = Location::new(coords)?;
            if euclid_dist_sq(&cand, &truth)? < u128::from(ctx.tau) * u128::from(ctx.tau) {
                break cand;
            }
        };
        let mut oracle = ctx.oracle(truth.clone(), &config, fixture.as_ref(), rng);
        let r = attack_level1_inside(&mut *oracle, &start, ctx.tau)?;
        let err = r.error(&truth);
        let ok = err.is_some_and(|e| e <= 2.0);
        located += usize::from(ok);
        max_queries = max_queries.max(r.queries);
        rows.push(vec![
            i.to_string(),
            truth.to_string(),
            r.rounded.map_or("-".into(), |l| l.to_string()),
            err.map_or("-".into(), |e| format!("{e:.3}")),
            r.queries.to_string(),
            ok.to_string(),
        ]);
    }
    let per_search = (2.0 * ctx.tau as f64).log2().ceil() as usize;
    writeln!(out, "located={located}/{trials}")?;
    writeln!(out, "max_queries={max_queries}")?;
    writeln!(out, "query_bound={}", (2 * ctx.dim - 1) * (per_search + 1))?;
    table(out, &["trial", "truth", "estimate", "error_m", "queries", "within_2m"], &rows)?;
    Ok(())
}

fn attack_l1out(
    ctx: &AttackCtx,
    trials: usize,
    extent: u64,
    rng: &mut ChaCha20Rng,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    ctx.header(out, "l1out", trials)?;
    let extents = vec![extent; ctx.dim];
    let est = expected_level1_outside_queries(&extents, ctx.tau)?;
    let mc = monte_carlo_first_hit(&extents, ctx.tau, trials, rng)?;
    writeln!(out, "tau={}", ctx.tau)?;
    writeln!(out, "extent={extent}")?;
    writeln!(out, "expected_first_hit={:.3}", est.first_hit)?;
    writeln!(out, "expected_refinement={:.3}", est.refinement)?;
    writeln!(out, "expected_total={:.3}", est.total)?;
    writeln!(out, "simulated_first_hit={:.3}", mc.mean)?;
    writeln!(out, "simulated_std_error={:.3}", mc.std_error)?;
    writeln!(out, "relative_gap={:.4}", mc.mean / est.first_hit - 1.0)?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn bench(
    level: Level,
    iters: usize,
    leaves: usize,
    dim: usize,
    key_bits: u32,
    cached_key: bool,
    rng: &mut ChaCha20Rng,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    if iters == 0 || leaves == 0 {
        return Err(CliError::Usage("--iters and --leaves must be positive".into()));
    }
    let attrs: Vec<String> = (0..leaves).map(|i| format!("attr{i}")).collect();
    let tree = AccessTree::new(Node::and(attrs.iter().map(Node::leaf).collect()))?;
    let (abe_pk, mk) = abe::setup(rng);
    let abe_sk = abe::keygen(&abe_pk, &mk, &attrs, rng)?;
    let config = SpaceConfig::earth(dim);
    let keys = if cached_key {
        KeySource::Cached(Arc::new(Keypair::generate(key_bits, rng)?))
    } else {
        KeySource::Ephemeral { bits: key_bits }
    };
    let tau = (level == Level::QuerierThreshold).then_some(1000);
    let publisher_tau = Some(1000);

    let mut rows = Vec::new();
    let mut totals = Vec::new();
    let (mut req_bytes, mut resp_bytes) = (0, 0);
    for i in 0..iters {
        let from = random_in(&config, rng);
        let at = random_in(&config, rng);
        let t0 = Instant::now();
        let (mut session, req) = q_begin(level, &from, &config, tau, &keys, rng)?;
        let msg = QueryMessage::new("bench", level, dim, req);
        req_bytes = msg.to_bytes().len();
        let t1 = Instant::now();
        let resp = p_respond(
            level,
            msg.request.as_ref(),
            &at,
            &tree,
            &abe_pk,
            publisher_tau,
            DisclosureFunction::Exact,
            rng,
        )?;
        resp_bytes = resp.to_bytes().len();
        let t2 = Instant::now();
        q_finish(&mut session, &resp, &abe_pk, &abe_sk)?;
        let t3 = Instant::now();
        let ms = |a: Instant, b: Instant| (b - a).as_secs_f64() * 1e3;
        totals.push(ms(t0, t3));
        rows.push(vec![
            i.to_string(),
            format!("{:.1}", ms(t0, t1)),
            format!("{:.1}", ms(t1, t2)),
            format!("{:.1}", ms(t2, t3)),
            format!("{:.1}", ms(t0, t3)),
        ]);
    }
    let mean = totals.iter().sum::<f64>() / totals.len() as f64;
    let max = totals.iter().cloned().fold(0.0, f64::max);
    writeln!(out, "level={}", level.as_u8())?;
    writeln!(out, "dim={dim}")?;
    writeln!(out, "leaves={leaves}")?;
    writeln!(out, "key_bits={key_bits}")?;
    writeln!(out, "cached_key={cached_key}")?;
    writeln!(out, "request_bytes={req_bytes}")?;
    writeln!(out, "response_bytes={resp_bytes}")?;
    writeln!(out, "mean_ms={mean:.1}")?;
    writeln!(out, "max_ms={max:.1}")?;
    table(out, &["iter", "begin_ms", "respond_ms", "finish_ms", "total_ms"], &rows)?;
    Ok(())
}

/// Used by the binary; kept here so the CLI stays testable in-process.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    run(args, &mut lock)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_ok(args: &[&str]) -> (i32, String) {
        let mut buf = Vec::new();
        let code = run(std::iter::once("locquery").chain(args.iter().copied()), &mut buf);
        (code, String::from_utf8(buf).unwrap())
    }

    fn value<'a>(out: &'a str, key: &str) -> &'a str {
        out.lines()
            .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
            .unwrap_or_else(|| panic!("no {key} in {out}"))
    }

    #[test]
    fn level_tree_specs() {
        let (l, t) = parse_level_tree("3=or(a, b)").unwrap();
        assert_eq!(l, Level::Distance);
        assert_eq!(t.leaf_count(), 2);
        assert!(parse_level_tree("5=a").is_err());
        assert!(parse_level_tree("a").is_err());
        assert!(matches!(parse_level_tree("1=and(a"), Err(CliError::Tree(_))));
    }

    #[test]
    fn usage_errors() {
        assert_eq!(run_ok(&[]).0, EXIT_USAGE);
        assert_eq!(run_ok(&["query", "--level", "9"]).0, EXIT_USAGE);
        assert_eq!(run_ok(&["attack", "--theorem", "l9"]).0, EXIT_USAGE);
        assert_eq!(run_ok(&["--help"]).0, EXIT_OK);
    }

    #[test]
    fn attack_commands_report() {
        let (code, out) = run_ok(&["--seed", "1", "attack", "--theorem", "l3", "--trials", "3"]);
        assert_eq!(code, 0, "{out}");
        assert_eq!(value(&out, "recovered"), "3/3");
        assert_eq!(value(&out, "max_queries"), "4");

        let (_, out) = run_ok(&["--seed", "1", "attack", "--theorem", "l3", "--trials", "3", "--guard"]);
        assert_eq!(value(&out, "recovered"), "0/3");
        assert_eq!(value(&out, "discarded"), "3");

        let (_, out) = run_ok(&["--seed", "2", "attack", "--theorem", "l2", "--trials", "3", "--dim", "2"]);
        assert_eq!(value(&out, "exact"), "3/3");

        let (_, out) = run_ok(&["--seed", "3", "attack", "--theorem", "l1in", "--trials", "3", "--dim", "2"]);
        assert_eq!(value(&out, "located"), "3/3");

        let (_, out) = run_ok(&[
            "--seed", "4", "attack", "--theorem", "l1out", "--trials", "500", "--dim", "2",
        ]);
        let expected: f64 = value(&out, "expected_first_hit").parse().unwrap();
        assert!((expected - 31.831).abs() < 0.01);
    }
}
