//! Orthant form of the correct-selection probability.
//!
//! For true set `K` the rule is correct iff every difference `z̃_i - z̃_j`,
//! `(i, j) ∈ K × Kᶜ`, is non-negative. Stacking the differences gives
//! `D = A z̃` with one row `e_iᵀ - e_jᵀ` per pair, so
//! `D ~ N(A μ, A diag(σ̃²) Aᵀ)` and `P(correct) = P(D ⪰ 0)`.
//!
//! Rows are ordered lexicographically by `(i, j)` with both indices ascending.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::{ErrorProbReport, Method, TopPProblem};
use crate::error::{Error, Result};
use crate::geometry::{true_top_p, TopPSet};
use crate::seed::{derive_seed, rng_from_seed};

/// Tolerance for the covariance self-check.
pub const COVARIANCE_TOLERANCE: f64 = 1e-12;

fn pairs(s: usize, top: &TopPSet) -> Vec<(usize, usize)> {
    let inside: Vec<usize> = top.indices().into_iter().collect();
    let outside: Vec<usize> = (0..s).filter(|i| !top.contains(*i)).collect();
    inside
        .iter()
        .flat_map(|&i| outside.iter().map(move |&j| (i, j)))
        .collect()
}

/// The `p(s-p) x s` matrix mapping readings to pairwise differences.
pub fn difference_matrix(s: usize, top: &TopPSet) -> DMatrix<f64> {
    let pr = pairs(s, top);
    let mut a = DMatrix::zeros(pr.len(), s);
    for (row, &(i, j)) in pr.iter().enumerate() {
        a[(row, i)] = 1.0;
        a[(row, j)] = -1.0;
    }
    a
}

/// Mean of the difference vector, `μ_i - μ_j` per pair.
pub fn difference_mean(means: &[f64], top: &TopPSet) -> DVector<f64> {
    let pr = pairs(means.len(), top);
    DVector::from_iterator(pr.len(), pr.iter().map(|&(i, j)| means[i] - means[j]))
}

/// Covariance of the difference vector from the indicator formula.
pub fn covariance_indicator(sigma: &[f64], top: &TopPSet) -> DMatrix<f64> {
    let pr = pairs(sigma.len(), top);
    let var = |k: usize| sigma[k] * sigma[k];
    let ind = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
    DMatrix::from_fn(pr.len(), pr.len(), |r, c| {
        let (i, j) = pr[r];
        let (i2, j2) = pr[c];
        var(i) * ind(i, i2) + var(j) * ind(j, j2) - var(i) * ind(i, j2) - var(j) * ind(j, i2)
    })
}

/// Covariance of the difference vector as `A diag(σ̃²) Aᵀ`.
pub fn covariance_factored(sigma: &[f64], top: &TopPSet) -> DMatrix<f64> {
    let a = difference_matrix(sigma.len(), top);
    let d = DMatrix::from_diagonal(&DVector::from_iterator(sigma.len(), sigma.iter().map(|v| v * v)));
    &a * d * a.transpose()
}

struct OrthantEstimate {
    hits: u64,
    draws: u64,
}

/// Error probability from Monte Carlo estimates of the orthant probabilities.
///
/// `n_mc` is the total number of draws, split as evenly as possible across
/// the grid; each grid point uses its own derived random stream.
pub fn error_prob_theorem1(problem: &TopPProblem, n_mc: u64, seed: u64) -> Result<ErrorProbReport> {
    let grid = problem.grid();
    let n_h = grid.len() as u64;
    if n_mc < 10_000 {
        return Err(Error::param(format!("n_mc = {n_mc} is below the minimum of 10000")));
    }
    if n_mc < n_h {
        return Err(Error::param(format!(
            "n_mc = {n_mc} is smaller than the {n_h} grid points"
        )));
    }
    let s = problem.map().len();
    let sigma = problem.sigma_tilde();
    let base = n_mc / n_h;
    let extra = n_mc % n_h;

    let estimates: Vec<OrthantEstimate> = grid
        .points()
        .par_iter()
        .enumerate()
        .map(|(hi, h)| -> Result<OrthantEstimate> {
            let top = true_top_p(problem.map(), h, problem.p())?;
            let mu = problem.means(h);
            let a = difference_matrix(s, &top);
            let mean = difference_mean(&mu, &top);
            let mean_check = &a * DVector::from_column_slice(&mu);
            if (&mean_check - &mean).amax() > COVARIANCE_TOLERANCE * (1.0 + mean.amax()) {
                return Err(Error::Internal(format!("difference mean mismatch at hypothesis {hi}")));
            }
            let direct = covariance_indicator(sigma, &top);
            let factored = covariance_factored(sigma, &top);
            let gap = (&direct - &factored).amax();
            if gap > COVARIANCE_TOLERANCE {
                return Err(Error::Internal(format!(
                    "covariance mismatch {gap:e} at hypothesis {hi}"
                )));
            }
            let draws = base + u64::from((hi as u64) < extra);
            let mut rng = rng_from_seed(derive_seed(seed, hi as u64));
            let mut z = DVector::<f64>::zeros(s);
            let mut d = DVector::<f64>::zeros(a.nrows());
            let mut hits = 0;
            for _ in 0..draws {
                for k in 0..s {
                    let eps: f64 = StandardNormal.sample(&mut rng);
                    z[k] = mu[k] + sigma[k] * eps;
                }
                d.gemv(1.0, &a, &z, 0.0);
                if d.iter().all(|&v| v >= 0.0) {
                    hits += 1;
                }
            }
            Ok(OrthantEstimate { hits, draws })
        })
        .collect::<Result<_>>()?;

    let n = estimates.len() as f64;
    let mut correct = 0.0;
    let mut var = 0.0;
    let mut per = Vec::with_capacity(estimates.len());
    for e in &estimates {
        let ph = e.hits as f64 / e.draws as f64;
        let adj = (e.hits as f64 + 1.0) / (e.draws as f64 + 2.0);
        correct += ph;
        var += adj * (1.0 - adj) / e.draws as f64;
        per.push(ph);
    }
    Ok(ErrorProbReport {
        p_error: (1.0 - correct / n).clamp(0.0, 1.0),
        method: Method::OrthantMc,
        uncertainty: var.sqrt() / n,
        per_hypothesis: Some(per),
    })
}
