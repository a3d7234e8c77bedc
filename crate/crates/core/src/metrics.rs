//! Containment scoring.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::geometry::TopPSet;

/// True when every sensor of every truth set is in `recommended`.
pub fn containment_success(truth_sets: &[TopPSet], recommended: &BTreeSet<usize>) -> bool {
    truth_sets
        .iter()
        .flat_map(|t| t.ranked().iter())
        .all(|i| recommended.contains(i))
}

/// Fraction of successful outcomes.
pub fn empirical_accuracy(outcomes: &[bool]) -> Result<f64> {
    if outcomes.is_empty() {
        return Err(Error::param("accuracy of an empty outcome list"));
    }
    let hits = outcomes.iter().filter(|&&b| b).count();
    Ok(hits as f64 / outcomes.len() as f64)
}

/// Standard error of a Bernoulli mean from `hits` out of `n`, using the
/// plus-two adjusted proportion so that all-hit or all-miss samples still
/// report a nonzero uncertainty.
pub fn binomial_standard_error(hits: u64, n: u64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = (hits as f64 + 1.0) / (n as f64 + 2.0);
    (p * (1.0 - p) / n as f64).sqrt()
}
