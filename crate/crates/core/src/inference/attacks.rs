use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rand::Rng;

use crate::geo::{euclid_dist_sq, Location, SpaceConfig};
use crate::protocol::Trichotomy;

use super::{InferenceError, QueryOracle};

#[derive(Debug, Clone, PartialEq)]
pub struct Level3Report {
    /// `None` when a query was discarded.
    pub recovered: Option<Location>,
    pub placements: Vec<Location>,
    pub distances: Vec<Option<u128>>,
    /// Queries issued, including discarded ones.
    pub queries: usize,
    /// Placement sets rejected locally as degenerate before querying.
    pub retries: usize,
}

/// Solves the sphere system `|p_k - x|² = r_k` exactly. Returns `Ok(None)`
/// when the placements are affinely dependent.
pub fn solve_level3(placements: &[Location], distances: &[u128]) -> Result<Option<Location>, InferenceError> {
    let dim = placements.first().map(Location::dim).unwrap_or(0);
    if placements.len() != dim + 1 || distances.len() != dim + 1 {
        return Err(InferenceError::InvalidParameters(format!(
            "need {} placements and distances",
            dim + 1
        )));
    }
    let big = |v: i128| BigRational::from_integer(BigInt::from(v));
    let p0 = placements[0].coords();
    // 2 (p_k - p_0) · x = |p_k|² - |p_0|² - r_k + r_0
    let mut rows: Vec<Vec<BigRational>> = (1..=dim)
        .map(|k| {
            let pk = placements[k].coords();
            let mut row: Vec<BigRational> = (0..dim).map(|i| big(2 * (pk[i] as i128 - p0[i] as i128))).collect();
            let rhs = BigInt::from(placements[k].norm_sq()) - BigInt::from(placements[0].norm_sq())
                - BigInt::from(distances[k])
                + BigInt::from(distances[0]);
            row.push(BigRational::from_integer(rhs));
            row
        })
        .collect();

    for col in 0..dim {
        let Some(pivot) = (col..dim).find(|&r| !rows[r][col].is_zero()) else {
            return Ok(None);
        };
        rows.swap(col, pivot);
        let inv = rows[col][col].recip();
        for v in rows[col].iter_mut() {
            *v = &*v * &inv;
        }
        for r in 0..dim {
            if r != col && !rows[r][col].is_zero() {
                let factor = rows[r][col].clone();
                for c in col..=dim {
                    let delta = &factor * &rows[col][c];
                    rows[r][c] = &rows[r][c] - delta;
                }
            }
        }
    }
    let coords = rows
        .iter()
        .map(|row| {
            let v = &row[dim];
            if !v.is_integer() {
                return Err(InferenceError::Inconsistent);
            }
            v.to_integer().to_i64().ok_or(InferenceError::Inconsistent)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let loc = Location::new(coords).map_err(|_| InferenceError::Inconsistent)?;
    for (p, &r) in placements.iter().zip(distances) {
        if euclid_dist_sq(p, &loc)? != r {
            return Err(InferenceError::Inconsistent);
        }
    }
    Ok(Some(loc))
}

/// Level-3 localization from caller-chosen placements.
pub fn attack_level3_from<O: QueryOracle + ?Sized>(
    oracle: &mut O,
    placements: &[Location],
) -> Result<Level3Report, InferenceError> {
    let distances = placements
        .iter()
        .map(|p| oracle.level3(p))
        .collect::<Result<Vec<_>, _>>()?;
    let recovered = match distances.iter().copied().collect::<Option<Vec<_>>>() {
        Some(ds) => Some(solve_level3(placements, &ds)?.ok_or(InferenceError::Singular(1))?),
        None => None,
    };
    Ok(Level3Report {
        recovered,
        placements: placements.to_vec(),
        queries: distances.len(),
        distances,
        retries: 0,
    })
}

fn affinely_independent(placements: &[Location]) -> bool {
    let zeros = vec![0u128; placements.len()];
    // The coefficient matrix does not depend on the distances, so a dummy
    // right-hand side is enough to test for singularity.
    !matches!(solve_level3(placements, &zeros), Ok(None))
}

fn random_point<R: Rng + ?Sized>(config: &SpaceConfig, rng: &mut R) -> Location {
    let coords = config.bounds().iter().map(|&(lo, hi)| rng.gen_range(lo..=hi)).collect();
    Location::new(coords).expect("config bounds are on the grid")
}

/// Level-3 localization with `d + 1` random placements in `config`.
/// Degenerate placement sets are redrawn locally, so exactly `d + 1`
/// queries are issued.
pub fn attack_level3<O: QueryOracle + ?Sized, R: Rng + ?Sized>(
    oracle: &mut O,
    config: &SpaceConfig,
    rng: &mut R,
    max_retries: usize,
) -> Result<Level3Report, InferenceError> {
    let dim = oracle.dim();
    if config.dim() != dim {
        return Err(InferenceError::InvalidParameters("config dimension mismatch".into()));
    }
    for retries in 0..=max_retries {
        let placements: Vec<Location> = (0..=dim).map(|_| random_point(config, rng)).collect();
        if affinely_independent(&placements) {
            let mut report = attack_level3_from(oracle, &placements)?;
            report.retries = retries;
            return Ok(report);
        }
    }
    Err(InferenceError::Singular(max_retries + 1))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Level2Report {
    /// `None` when the search was cut off.
    pub dist_sq: Option<u128>,
    /// The squared distance is known to lie in `[lo, hi]`.
    pub lo: u128,
    pub hi: u128,
    pub queries: usize,
}

/// Binary search over the querier's squared threshold in `[0, max_dist_sq]`.
pub fn attack_level2<O: QueryOracle + ?Sized>(
    oracle: &mut O,
    from: &Location,
    max_dist_sq: u128,
) -> Result<Level2Report, InferenceError> {
    let (mut lo, mut hi) = (0u128, max_dist_sq);
    let mut queries = 0;
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        queries += 1;
        match oracle.level2(from, mid)? {
            Some(Trichotomy::Equal) => {
                return Ok(Level2Report {
                    dist_sq: Some(mid),
                    lo: mid,
                    hi: mid,
                    queries,
                })
            }
            Some(Trichotomy::Less) => hi = mid.saturating_sub(1),
            Some(Trichotomy::Greater) => lo = mid + 1,
            None => {
                return Ok(Level2Report {
                    dist_sq: None,
                    lo,
                    hi,
                    queries,
                })
            }
        }
    }
    Ok(Level2Report {
        dist_sq: Some(lo),
        lo,
        hi,
        queries,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Level1Report {
    /// Real-valued center estimate, `None` when a query was discarded.
    pub estimate: Option<Vec<f64>>,
    /// The estimate rounded to the grid.
    pub rounded: Option<Location>,
    pub queries: usize,
    pub discarded: bool,
    /// When cut off: the boundary lies between these offsets along the
    /// search in progress.
    pub bracket: Option<(i64, i64)>,
}

impl Level1Report {
    /// Euclidean error of the estimate against `truth`.
    pub fn error(&self, truth: &Location) -> Option<f64> {
        self.estimate.as_ref().map(|e| {
            e.iter()
                .zip(truth.coords())
                .map(|(a, &b)| (a - b as f64).powi(2))
                .sum::<f64>()
                .sqrt()
        })
    }
}

enum Search {
    /// Boundary offset estimate and the last offset known strictly inside.
    Found { boundary: f64, inside: i64 },
    Blocked { lo: i64, hi: i64 },
}

fn shifted(base: &[i64], axis: usize, offset: i64) -> Result<Location, InferenceError> {
    let mut c = base.to_vec();
    c[axis] += offset;
    Ok(Location::new(c)?)
}

/// Brackets the boundary between offset 0 (strictly inside) and `2τ`
/// (necessarily outside) along `sign · e_axis`.
fn search<O: QueryOracle + ?Sized>(
    oracle: &mut O,
    base: &[i64],
    axis: usize,
    sign: i64,
    tau: u64,
    queries: &mut usize,
) -> Result<Search, InferenceError> {
    let (mut lo, mut hi) = (0i64, 2 * tau as i64);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        *queries += 1;
        match oracle.level1(&shifted(base, axis, sign * mid)?)? {
            Some(Trichotomy::Less) => lo = mid,
            Some(Trichotomy::Greater) => hi = mid,
            Some(Trichotomy::Equal) => {
                return Ok(Search::Found {
                    boundary: mid as f64,
                    inside: lo,
                })
            }
            None => return Ok(Search::Blocked { lo, hi }),
        }
    }
    Ok(Search::Found {
        boundary: lo as f64 + 0.5,
        inside: lo,
    })
}

/// Localizes the publisher from a start point strictly inside its
/// threshold sphere, using only level-1 answers.
///
/// For each axis but the last, the chord through the current point is
/// bracketed in both directions; its midpoint is that coordinate of the
/// center, and the rounded midpoint (still strictly inside by convexity)
/// is the base for the next axis. The last coordinate follows from a
/// single boundary point and the known radius. That is `2d - 1` searches
/// of at most `⌈log₂ 2τ⌉` queries each, plus the initial check.
pub fn attack_level1_inside<O: QueryOracle + ?Sized>(
    oracle: &mut O,
    start: &Location,
    tau: u64,
) -> Result<Level1Report, InferenceError> {
    if tau == 0 {
        return Err(InferenceError::InvalidParameters("tau must be positive".into()));
    }
    let dim = start.dim();
    let mut queries = 1;
    let blocked = |queries, bracket| Level1Report {
        estimate: None,
        rounded: None,
        queries,
        discarded: true,
        bracket,
    };
    match oracle.level1(start)? {
        Some(Trichotomy::Less) => {}
        Some(other) => return Err(InferenceError::NotInside(other)),
        None => return Ok(blocked(queries, None)),
    }

    let mut base = start.coords().to_vec();
    let mut center = vec![0f64; dim];
    for axis in 0..dim - 1 {
        let plus = match search(oracle, &base, axis, 1, tau, &mut queries)? {
            Search::Found { boundary, inside } => (boundary, inside),
            Search::Blocked { lo, hi } => return Ok(blocked(queries, Some((lo, hi)))),
        };
        let minus = match search(oracle, &base, axis, -1, tau, &mut queries)? {
            Search::Found { boundary, inside } => (boundary, inside),
            Search::Blocked { lo, hi } => return Ok(blocked(queries, Some((-hi, -lo)))),
        };
        center[axis] = base[axis] as f64 + (plus.0 - minus.0) / 2.0;
        let rounded = center[axis].round() as i64;
        base[axis] = rounded.clamp(base[axis] - minus.1, base[axis] + plus.1);
    }
    let last = dim - 1;
    let (boundary, _) = match search(oracle, &base, last, 1, tau, &mut queries)? {
        Search::Found { boundary, inside } => (boundary, inside),
        Search::Blocked { lo, hi } => return Ok(blocked(queries, Some((lo, hi)))),
    };
    let off_axis: f64 = (0..last).map(|i| (base[i] as f64 - center[i]).powi(2)).sum();
    let tau_f = tau as f64;
    center[last] = base[last] as f64 + boundary - (tau_f * tau_f - off_axis).max(0.0).sqrt();

    let rounded = Location::new(center.iter().map(|c| c.round() as i64).collect())?;
    Ok(Level1Report {
        estimate: Some(center),
        rounded: Some(rounded),
        queries,
        discarded: false,
        bracket: None,
    })
}
