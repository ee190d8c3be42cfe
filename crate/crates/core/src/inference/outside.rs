use std::f64::consts::PI;

use rand::Rng;

use crate::geo::Location;
use crate::protocol::Trichotomy;

use super::{InferenceError, QueryOracle, SimulatedPublisher};

/// Expected level-1 queries for a querier that starts outside the
/// threshold region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutsideEstimate {
    /// Random guesses until one lands inside: grid size over region size.
    pub first_hit: f64,
    /// Boundary searches once inside: `(2d - 1) · log₂(2τ)`.
    pub refinement: f64,
    pub total: f64,
}

fn validate(extent: &[u64], tau: u64) -> Result<(), InferenceError> {
    if !(2..=3).contains(&extent.len()) {
        return Err(InferenceError::InvalidParameters(format!("{} axes", extent.len())));
    }
    if tau == 0 || extent.contains(&0) {
        return Err(InferenceError::InvalidParameters("tau and extents must be positive".into()));
    }
    let diameter = extent.iter().map(|&e| (e as f64).powi(2)).sum::<f64>().sqrt();
    if tau as f64 >= diameter {
        return Err(InferenceError::InvalidParameters(format!(
            "tau {tau} must be smaller than the diameter {diameter:.1}"
        )));
    }
    Ok(())
}

/// `extent` holds the number of grid coordinates per axis (`X, Y[, Z]`).
pub fn expected_level1_outside_queries(extent: &[u64], tau: u64) -> Result<OutsideEstimate, InferenceError> {
    validate(extent, tau)?;
    let cells: f64 = extent.iter().map(|&e| e as f64).product();
    let t = tau as f64;
    let region = if extent.len() == 2 {
        PI * t * t
    } else {
        4.0 / 3.0 * PI * t * t * t
    };
    let first_hit = cells / region;
    let refinement = (2 * extent.len() - 1) as f64 * (2.0 * t).log2();
    Ok(OutsideEstimate {
        first_hit,
        refinement,
        total: first_hit + refinement,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloReport {
    pub trials: usize,
    pub mean: f64,
    pub std_error: f64,
}

/// Simulates random guessing: each trial places the publisher uniformly
/// with its threshold region fully inside the grid, then queries uniform
/// random grid points until one is not outside. Reports the mean number of
/// guesses.
pub fn monte_carlo_first_hit<R: Rng + ?Sized>(
    extent: &[u64],
    tau: u64,
    trials: usize,
    rng: &mut R,
) -> Result<MonteCarloReport, InferenceError> {
    validate(extent, tau)?;
    if extent.iter().any(|&e| e <= 2 * tau) {
        return Err(InferenceError::InvalidParameters(
            "the threshold region must fit inside the grid".into(),
        ));
    }
    if trials == 0 {
        return Err(InferenceError::InvalidParameters("no trials".into()));
    }
    let t = tau as i64;
    let mut counts = Vec::with_capacity(trials);
    for _ in 0..trials {
        let center = Location::new(extent.iter().map(|&e| rng.gen_range(t..e as i64 - t)).collect())?;
        let mut publisher = SimulatedPublisher::new(center, tau);
        let mut guesses = 0u64;
        loop {
            guesses += 1;
            let guess = Location::new(extent.iter().map(|&e| rng.gen_range(0..e as i64)).collect())?;
            match publisher.level1(&guess)? {
                Some(Trichotomy::Greater) => continue,
                _ => break,
            }
        }
        counts.push(guesses as f64);
    }
    let n = counts.len() as f64;
    let mean = counts.iter().sum::<f64>() / n;
    let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    Ok(MonteCarloReport {
        trials,
        mean,
        std_error: (var / n).sqrt(),
    })
}
