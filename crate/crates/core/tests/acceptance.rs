//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! gating criterion fails. Runs without the libtest harness so the lines
//! always reach the output.

use std::f64::consts::PI;
use std::panic::{self, AssertUnwindSafe};
use std::sync::Arc;
use std::time::{Duration, Instant};

use num_bigint::{BigInt, BigUint, RandBigInt};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use locquery::abe::{self, attributes, AccessTree, AttributeSet, Node};
use locquery::geo::{euclid_dist_sq, geodetic_to_cartesian, to_grid, Location, SpaceConfig, COORD_LIMIT};
use locquery::inference::{
    attack_level1_inside, attack_level2, attack_level3, monte_carlo_first_hit, Outcome, ProtocolOracle, QueryOracle,
    SimulatedPublisher,
};
use locquery::paillier::Keypair;
use locquery::protocol::{
    blinded_comparison, interpret_comparison, p_respond, q_begin, q_begin_with_tau_sq, q_finish, sample_blinds,
    DisclosureFunction, KeySource, Level, QueryMessage, QueryResult, ThresholdSource, Trichotomy,
};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

struct Fixture {
    keys: KeySource,
    kp: Arc<Keypair>,
    abe_pk: abe::PublicKey,
    abe_sk: abe::SecretKey,
    tree: AccessTree,
}

fn fixture(rng: &mut ChaCha20Rng) -> Fixture {
    let kp = Arc::new(Keypair::generate(1024, rng).unwrap());
    let (abe_pk, mk) = abe::setup(rng);
    let abe_sk = abe::keygen(&abe_pk, &mk, ["friend", "coworker"], rng).unwrap();
    let tree = AccessTree::new(Node::or(vec![Node::leaf("friend"), Node::leaf("family")])).unwrap();
    Fixture {
        keys: KeySource::Cached(Arc::clone(&kp)),
        kp,
        abe_pk,
        abe_sk,
        tree,
    }
}

fn random_in(config: &SpaceConfig, rng: &mut ChaCha20Rng) -> Location {
    Location::new(config.bounds().iter().map(|&(lo, hi)| rng.gen_range(lo..=hi)).collect()).unwrap()
}

/// Independent distance oracle, in i128 on the raw coordinates.
fn dist_sq_oracle(a: &Location, b: &Location) -> u128 {
    a.coords()
        .iter()
        .zip(b.coords())
        .map(|(&x, &y)| {
            let d = x as i128 - y as i128;
            (d * d) as u128
        })
        .sum()
}

// 1 ─────────────────────────────────────────────────────────────────────────

fn paillier_identities(rng: &mut ChaCha20Rng) -> Verdict {
    let start = Instant::now();
    let mut failures = 0;
    let mut details = Vec::new();
    for bits in [16u32, 1024] {
        let t = Instant::now();
        let kp = Keypair::generate(bits, rng).unwrap();
        let pk = kp.public();
        let n = pk.n().clone();
        for i in 0..1000 {
            let a = rng.gen_biguint_below(&n);
            let b = rng.gen_biguint_below(&n);
            let ea = kp.encrypt(&a, rng).unwrap();
            let eb = pk.encrypt(&b, rng).unwrap();
            let k = BigInt::from(rng.gen_biguint_below(&n)) - BigInt::from(&n >> 1u32);
            let k_mod = k.mod_floor_n(&n);
            let ok = kp.decrypt(&ea).unwrap() == a
                && kp.decrypt(&pk.add(&ea, &eb).unwrap()).unwrap() == (&a + &b) % &n
                && kp.decrypt(&pk.scalar_mul(&ea, &k).unwrap()).unwrap() == (&a * &k_mod) % &n;
            // rerandomization is the costly public-key path; check a tenth
            let ok = ok && (i % 10 != 0 || {
                let r = pk.rerandomize(&ea, rng).unwrap();
                r != ea && kp.decrypt(&r).unwrap() == a
            });
            failures += usize::from(!ok);
        }
        details.push(format!("{bits}-bit {:.1}s", t.elapsed().as_secs_f64()));
    }
    let elapsed = start.elapsed();
    verdict(
        failures == 0 && elapsed < Duration::from_secs(60),
        format!(
            "2x1000 pairs, {failures} failures, {} (total {:.1}s, limit 60s)",
            details.join(", "),
            elapsed.as_secs_f64()
        ),
    )
}

trait ModFloor {
    fn mod_floor_n(&self, n: &BigUint) -> BigUint;
}

impl ModFloor for BigInt {
    fn mod_floor_n(&self, n: &BigUint) -> BigUint {
        let n = BigInt::from(n.clone());
        (((self % &n) + &n) % &n).to_biguint().unwrap()
    }
}

// 2 ─────────────────────────────────────────────────────────────────────────

fn level3_exact(f: &Fixture, rng: &mut ChaCha20Rng) -> Verdict {
    let mut mismatches = 0;
    let mut count = 0;
    for dim in [2usize, 3] {
        let config = SpaceConfig::earth(dim);
        for i in 0..200 {
            let from = random_in(&config, rng);
            // a few coincident and axis-aligned pairs alongside random ones
            let at = match i % 20 {
                0 => from.clone(),
                1 => {
                    let mut c = from.coords().to_vec();
                    c[0] = if c[0] > 0 { c[0] - 1 } else { c[0] + 1 };
                    Location::new(c).unwrap()
                }
                _ => random_in(&config, rng),
            };
            let (mut s, req) = q_begin(Level::Distance, &from, &config, None, &f.keys, rng).unwrap();
            let resp = p_respond(
                Level::Distance,
                req.as_ref(),
                &at,
                &f.tree,
                &f.abe_pk,
                None,
                DisclosureFunction::Exact,
                rng,
            )
            .unwrap();
            let got = match q_finish(&mut s, &resp, &f.abe_pk, &f.abe_sk).unwrap() {
                QueryResult::Distance { squared, .. } => squared,
                other => panic!("unexpected {other:?}"),
            };
            let want = dist_sq_oracle(&from, &at);
            if got != want || got != euclid_dist_sq(&from, &at).unwrap() {
                mismatches += 1;
            }
            count += 1;
        }
    }
    verdict(mismatches == 0, format!("{count} pairs (d=2,3), {mismatches} mismatches"))
}

// 3 ─────────────────────────────────────────────────────────────────────────

fn comparisons(f: &Fixture, rng: &mut ChaCha20Rng) -> Verdict {
    let config = SpaceConfig::earth(3);
    let mut wrong = 0;
    let mut seen = [0usize; 3];
    let mut total = 0;
    for block in 0..1000 {
        let from = random_in(&config, rng);
        let level2 = block % 2 == 1;
        let block_tau: u64 = rng.gen_range(1..=1 << 20);
        let req = if level2 {
            let t = u128::from(block_tau).pow(2);
            q_begin_with_tau_sq(Level::QuerierThreshold, &from, &config, Some(t), &f.keys, rng)
        } else {
            q_begin(Level::PublisherThreshold, &from, &config, None, &f.keys, rng)
        }
        .unwrap()
        .1
        .unwrap();
        for j in 0..10 {
            let tau = if level2 { block_tau } else { rng.gen_range(1..=1 << 20) };
            let at = match j % 3 {
                // exactly on the boundary
                0 => {
                    let mut c = from.coords().to_vec();
                    let axis = (j / 3) % 3;
                    c[axis] += if c[axis] > 0 { -(tau as i64) } else { tau as i64 };
                    Location::new(c).unwrap()
                }
                1 => {
                    let t = tau as i64;
                    Location::new(from.coords().iter().map(|c| c + rng.gen_range(-t..=t)).collect())
                        .unwrap()
                }
                _ => random_in(&config, rng),
            };
            let source = if level2 {
                ThresholdSource::Request
            } else {
                ThresholdSource::Publisher(u128::from(tau).pow(2))
            };
            let blinds = sample_blinds(rng);
            let (cd, ct) = blinded_comparison(&req, &at, source, &blinds, rng).unwrap();
            let got = interpret_comparison(&f.kp.decrypt(&cd).unwrap(), &f.kp.decrypt(&ct).unwrap());
            let want = match dist_sq_oracle(&from, &at) as i128 - (tau as i128).pow(2) {
                d if d < 0 => Trichotomy::Less,
                0 => Trichotomy::Equal,
                _ => Trichotomy::Greater,
            };
            wrong += usize::from(got != want);
            seen[want as usize] += 1;
            total += 1;
        }
    }
    verdict(
        wrong == 0 && seen.iter().all(|&s| s > 0),
        format!(
            "{total} comparisons (levels 1 and 2), {wrong} wrong; outcomes <:{} =:{} >:{}",
            seen[0], seen[1], seen[2]
        ),
    )
}

// 4 ─────────────────────────────────────────────────────────────────────────

const UNIVERSE: [&str; 8] = ["a", "b", "c", "d", "e", "f", "g", "h"];

fn random_node(rng: &mut ChaCha20Rng, depth_left: usize, leaf_budget: &mut usize) -> Node {
    if depth_left == 0 || *leaf_budget <= 1 || rng.gen_bool(0.35) {
        *leaf_budget = leaf_budget.saturating_sub(1);
        return Node::leaf(UNIVERSE[rng.gen_range(0..UNIVERSE.len())]);
    }
    let arity = rng.gen_range(2..=4).min(*leaf_budget);
    let children: Vec<Node> = (0..arity)
        .map(|_| random_node(rng, depth_left - 1, leaf_budget))
        .collect();
    let k = rng.gen_range(1..=children.len());
    Node::gate(k, children)
}

/// Independent evaluator: counts satisfied children bottom-up.
fn satisfied(node: &Node, attrs: &AttributeSet) -> bool {
    match node {
        Node::Leaf(a) => attrs.contains(a),
        Node::Gate { threshold, children } => {
            children.iter().filter(|c| satisfied(c, attrs)).count() >= *threshold as usize
        }
    }
}

fn count_leaves(node: &Node) -> usize {
    match node {
        Node::Leaf(_) => 1,
        Node::Gate { children, .. } => children.iter().map(count_leaves).sum(),
    }
}

fn abe_trees(rng: &mut ChaCha20Rng) -> Verdict {
    let (pk, mk) = abe::setup(rng);
    let mut wrong = 0;
    let (mut sat, mut unsat) = (0, 0);
    for _ in 0..200 {
        let tree = loop {
            let mut budget = 10;
            let node = random_node(rng, 3, &mut budget);
            if count_leaves(&node) <= 10 {
                break AccessTree::new(node).unwrap();
            }
        };
        let attrs: Vec<&str> = loop {
            let a: Vec<&str> = UNIVERSE.iter().copied().filter(|_| rng.gen_bool(0.5)).collect();
            if !a.is_empty() {
                break a;
            }
        };
        let sk = abe::keygen(&pk, &mk, &attrs, rng).unwrap();
        let payload: Vec<u8> = (0..rng.gen_range(0..64)).map(|_| rng.gen()).collect();
        let ct = abe::encrypt(&pk, &payload, &tree, rng).unwrap();
        let expect = satisfied(tree.root(), &attributes(attrs.iter().copied()));
        let got = abe::decrypt(&pk, &sk, &ct);
        match (&got, expect) {
            (Ok(p), true) if *p == payload => sat += 1,
            (Err(abe::AbeError::NotSatisfied), false) => unsat += 1,
            _ => wrong += 1,
        }
    }
    verdict(
        wrong == 0 && sat > 20 && unsat > 20,
        format!("200 trees (<=10 leaves, depth <=3 edges), {wrong} wrong; {sat} satisfied, {unsat} not"),
    )
}

// 5 ─────────────────────────────────────────────────────────────────────────

fn bandwidth(f: &Fixture, rng: &mut ChaCha20Rng) -> Verdict {
    let config = SpaceConfig::earth(3);
    let from = random_in(&config, rng);
    let at = random_in(&config, rng);
    let expect_payload = [1280usize, 1536, 1280, 0];
    let mut ok = true;
    let mut parts = Vec::new();
    for (level, want) in Level::ALL.into_iter().zip(expect_payload) {
        let tau = (level == Level::QuerierThreshold).then_some(500);
        let (_, req) = q_begin(level, &from, &config, tau, &f.keys, rng).unwrap();
        let payload = req.as_ref().map_or(0, |r| r.ciphertext_payload_len());
        let msg = QueryMessage::new("q", level, 3, req);
        let resp = p_respond(
            level,
            msg.request.as_ref(),
            &at,
            &f.tree,
            &f.abe_pk,
            Some(500),
            DisclosureFunction::Exact,
            rng,
        )
        .unwrap();
        let want_parts = [2, 2, 1, 3][level.as_u8() as usize - 1];
        ok &= payload == want && resp.parts.len() == want_parts;
        parts.push(format!(
            "L{}: payload={payload} wire={} parts={} resp={}B",
            level.as_u8(),
            msg.to_bytes().len(),
            resp.parts.len(),
            resp.to_bytes().len()
        ));
    }
    verdict(ok, parts.join("; "))
}

// 6 ─────────────────────────────────────────────────────────────────────────

fn level3_attack(f: &Fixture, rng: &mut ChaCha20Rng) -> Verdict {
    let config = SpaceConfig::earth(3);
    let (mut exact, mut in_four, mut guarded_recovered, mut fourth_dropped) = (0, 0, 0, 0);
    let trials = 100;
    for i in 0..trials {
        let truth = random_in(&config, rng);
        // the first few trials run over the full protocol
        let crypto = i < 3;
        let oracle_seed: u64 = rng.gen();
        let mk = |guard: bool| -> Box<dyn QueryOracle> {
            if crypto {
                let o = ProtocolOracle::new(
                    config.clone(),
                    truth.clone(),
                    100,
                    f.tree.clone(),
                    f.abe_pk.clone(),
                    f.abe_sk.clone(),
                    f.keys.clone(),
                    ChaCha20Rng::seed_from_u64(oracle_seed),
                );
                Box::new(if guard { o.with_guard() } else { o })
            } else if guard {
                Box::new(SimulatedPublisher::guarded(truth.clone(), 100))
            } else {
                Box::new(SimulatedPublisher::new(truth.clone(), 100))
            }
        };
        let mut o = mk(false);
        let r = attack_level3(&mut *o, &config, rng, 16).unwrap();
        exact += usize::from(r.recovered.as_ref() == Some(&truth));
        in_four += usize::from(r.queries == 4 && o.log().total() == 4);

        let mut g = mk(true);
        let r = attack_level3(&mut *g, &config, rng, 16).unwrap();
        guarded_recovered += usize::from(r.recovered.is_some());
        let entries = g.log().entries();
        fourth_dropped += usize::from(
            entries.len() == 4
                && entries[..3].iter().all(|e| e.outcome != Outcome::Discarded)
                && entries[3].outcome == Outcome::Discarded,
        );
    }
    verdict(
        exact == trials && in_four == trials && guarded_recovered == 0 && fourth_dropped == trials,
        format!(
            "d=3: exact {exact}/{trials}, 4 queries {in_four}/{trials}; guarded: recovered \
             {guarded_recovered}/{trials}, 4th discarded {fourth_dropped}/{trials} (3 trials over the full protocol)"
        ),
    )
}

// 7 ─────────────────────────────────────────────────────────────────────────

fn level2_attack(f: &Fixture, rng: &mut ChaCha20Rng) -> Verdict {
    let max = (COORD_LIMIT as u128).pow(2);
    let (mut exact, mut worst) = (0, 0);
    let trials = 100;
    for i in 0..trials {
        let dim = 2 + i % 2;
        let from = Location::origin(dim).unwrap();
        let truth = loop {
            let c = Location::new((0..dim).map(|_| rng.gen_range(-COORD_LIMIT..=COORD_LIMIT)).collect()).unwrap();
            if dist_sq_oracle(&c, &from) <= max {
                break c;
            }
        };
        let mut o: Box<dyn QueryOracle> = if i < 2 {
            Box::new(ProtocolOracle::new(
                SpaceConfig::earth(dim),
                truth.clone(),
                100,
                f.tree.clone(),
                f.abe_pk.clone(),
                f.abe_sk.clone(),
                f.keys.clone(),
                ChaCha20Rng::seed_from_u64(rng.gen()),
            ))
        } else {
            Box::new(SimulatedPublisher::new(truth.clone(), 100))
        };
        let r = attack_level2(&mut *o, &from, max).unwrap();
        exact += usize::from(r.dist_sq == Some(dist_sq_oracle(&truth, &from)) && r.queries <= 53);
        worst = worst.max(r.queries);
    }
    verdict(
        exact == trials && worst <= 53,
        format!("D=2^26: exact within 53 queries {exact}/{trials}, worst {worst} queries (2 trials over the full protocol)"),
    )
}

// 8 ─────────────────────────────────────────────────────────────────────────

fn level1_inside(f: &Fixture, rng: &mut ChaCha20Rng) -> Verdict {
    let trials = 100;
    let (mut located, mut within_budget, mut guarded_fail, mut worst_err) = (0, 0, 0, 0.0f64);
    for i in 0..trials {
        let tau: u64 = rng.gen_range(4..=1000);
        let t = tau as i64;
        let truth = Location::plane(rng.gen_range(-1_000_000..=1_000_000), rng.gen_range(-1_000_000..=1_000_000)).unwrap();
        let start = loop {
            let c = Location::new(truth.coords().iter().map(|c| c + rng.gen_range(-t..=t)).collect()).unwrap();
            if dist_sq_oracle(&c, &truth) < u128::from(tau * tau) {
                break c;
            }
        };
        let budget = 3 * ((2.0 * tau as f64).log2().ceil() as usize + 1);
        let crypto = i < 2;
        let mk = |guard: bool, seed: u64| -> Box<dyn QueryOracle> {
            if crypto {
                let o = ProtocolOracle::new(
                    SpaceConfig::earth(2),
                    truth.clone(),
                    tau,
                    f.tree.clone(),
                    f.abe_pk.clone(),
                    f.abe_sk.clone(),
                    f.keys.clone(),
                    ChaCha20Rng::seed_from_u64(seed),
                );
                Box::new(if guard { o.with_guard() } else { o })
            } else if guard {
                Box::new(SimulatedPublisher::guarded(truth.clone(), tau))
            } else {
                Box::new(SimulatedPublisher::new(truth.clone(), tau))
            }
        };
        let mut o = mk(false, rng.gen());
        let r = attack_level1_inside(&mut *o, &start, tau).unwrap();
        let err = r.error(&truth).unwrap_or(f64::INFINITY);
        worst_err = worst_err.max(err);
        located += usize::from(err <= 2.0);
        within_budget += usize::from(r.queries <= budget);

        let mut g = mk(true, rng.gen());
        let r = attack_level1_inside(&mut *g, &start, tau).unwrap();
        guarded_fail += usize::from(r.error(&truth).is_none_or(|e| e > 2.0));
    }
    verdict(
        located == trials && within_budget == trials && guarded_fail >= 95,
        format!(
            "plane, tau in [4,1000]: error<=2m {located}/{trials} (worst {worst_err:.3}m), within \
             3(ceil(log2 2tau)+1) queries {within_budget}/{trials}; guarded failures {guarded_fail}/{trials}"
        ),
    )
}

// 9 ─────────────────────────────────────────────────────────────────────────

fn monte_carlo(rng: &mut ChaCha20Rng) -> Verdict {
    let predicted = 1000.0 * 1000.0 / (PI * 100.0 * 100.0);
    let mc = monte_carlo_first_hit(&[1000, 1000], 100, 10_000, rng).unwrap();
    let rel = mc.mean / predicted - 1.0;
    verdict(
        rel.abs() <= 0.15,
        format!(
            "10^4 trials: mean {:.2} (se {:.2}) vs XY/(pi tau^2) = {predicted:.2}, off by {:+.1}% (limit 15%)",
            mc.mean,
            mc.std_error,
            rel * 100.0
        ),
    )
}

// 10 ────────────────────────────────────────────────────────────────────────

fn performance(rng: &mut ChaCha20Rng) -> Verdict {
    let names: Vec<String> = (0..10).map(|i| format!("attr{i}")).collect();
    let tree = AccessTree::new(Node::and(names.iter().map(Node::leaf).collect())).unwrap();
    let (pk, mk) = abe::setup(rng);
    let sk = abe::keygen(&pk, &mk, &names, rng).unwrap();
    let config = SpaceConfig::earth(3);
    let keys = KeySource::default();
    let mut worst = Duration::ZERO;
    let mut times = Vec::new();
    for level in Level::ALL {
        let from = random_in(&config, rng);
        let at = random_in(&config, rng);
        let tau = (level == Level::QuerierThreshold).then_some(1000);
        let t = Instant::now();
        let (mut s, req) = q_begin(level, &from, &config, tau, &keys, rng).unwrap();
        let resp = p_respond(level, req.as_ref(), &at, &tree, &pk, Some(1000), DisclosureFunction::Exact, rng).unwrap();
        q_finish(&mut s, &resp, &pk, &sk).unwrap();
        let e = t.elapsed();
        worst = worst.max(e);
        times.push(format!("L{}={:.0}ms", level.as_u8(), e.as_secs_f64() * 1e3));
    }
    verdict(
        worst < Duration::from_millis(1500),
        format!(
            "10-leaf and-tree, fresh 1024-bit key per query: {} (limit 1500ms; report only)",
            times.join(" ")
        ),
    )
}

// 11 ────────────────────────────────────────────────────────────────────────

fn grid_perturbation(rng: &mut ChaCha20Rng) -> Verdict {
    let config = SpaceConfig::earth(3);
    let radius = config.radius();
    let (mut worst, mut over_sqrt2) = (0.0f64, 0);
    let point = |rng: &mut ChaCha20Rng| {
        (
            rng.gen_range(-90.0..=90.0),
            rng.gen_range(-180.0..=180.0),
            rng.gen_range(0.0..9000.0),
        )
    };
    for i in 0..1000 {
        let a: (f64, f64, f64) = point(rng);
        // half the pairs are close together, where rounding matters most
        let b = if i % 2 == 0 {
            point(rng)
        } else {
            (
                (a.0 + rng.gen_range(-0.01..0.01)).clamp(-90.0, 90.0),
                (a.1 + rng.gen_range(-0.01..0.01)).clamp(-180.0, 180.0),
                a.2 + rng.gen_range(0.0..100.0),
            )
        };
        let ca = geodetic_to_cartesian(a.0, a.1, a.2, radius).unwrap();
        let cb = geodetic_to_cartesian(b.0, b.1, b.2, radius).unwrap();
        let true_dist = ca.iter().zip(&cb).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let ga = to_grid(a.0, a.1, a.2, &config).unwrap();
        let gb = to_grid(b.0, b.1, b.2, &config).unwrap();
        let grid_dist = (euclid_dist_sq(&ga, &gb).unwrap() as f64).sqrt();
        let p = (grid_dist - true_dist).abs();
        worst = worst.max(p);
        over_sqrt2 += usize::from(p > 2f64.sqrt());
    }
    verdict(
        worst <= 3f64.sqrt(),
        format!(
            "1000 pairs: max perturbation {worst:.4}m (limit sqrt3 = 1.7321); sqrt2 bound {} ({over_sqrt2} pairs above)",
            if over_sqrt2 == 0 { "held" } else { "did not hold" }
        ),
    )
}

fn main() {
    let mut rng = ChaCha20Rng::seed_from_u64(0x5eed_2026);
    let fx = fixture(&mut rng);
    type Check<'a> = Box<dyn FnOnce(&mut ChaCha20Rng) -> Verdict + 'a>;
    let criteria: Vec<(usize, bool, Check)> = vec![
        (1, true, Box::new(paillier_identities)),
        (2, true, Box::new(|r| level3_exact(&fx, r))),
        (3, true, Box::new(|r| comparisons(&fx, r))),
        (4, true, Box::new(abe_trees)),
        (5, true, Box::new(|r| bandwidth(&fx, r))),
        (6, true, Box::new(|r| level3_attack(&fx, r))),
        (7, true, Box::new(|r| level2_attack(&fx, r))),
        (8, true, Box::new(|r| level1_inside(&fx, r))),
        (9, true, Box::new(monte_carlo)),
        (10, false, Box::new(performance)),
        (11, true, Box::new(grid_perturbation)),
    ];
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|v| v.parse().ok());
    let mut failed = Vec::new();
    for (n, gating, check) in criteria {
        if only.is_some_and(|o| o != n) {
            continue;
        }
        let t = Instant::now();
        let v = panic::catch_unwind(AssertUnwindSafe(|| check(&mut rng)))
            .unwrap_or_else(|e| {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                verdict(false, format!("panicked: {msg}"))
            });
        println!(
            "criterion {n}: {} - {} [{:.1}s]",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail,
            t.elapsed().as_secs_f64()
        );
        if !v.pass && gating {
            failed.push(n);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all gating criteria passed");
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
