//! Correct-selection probability as a one-dimensional integral.
//!
//! With `U = min_{i∈K} z̃_i` and `V = max_{j∉K} z̃_j`, the rule is correct iff
//! `U > V`, so `P(correct) = ∫ P(U > v) f_V(v) dv`. Independence gives
//! `P(U > v) = Π_{i∈K} (1 - Φ((v-μ_i)/σ_i))` and
//! `f_V(v) = Σ_{j∉K} φ((v-μ_j)/σ_j)/σ_j · Π_{l∉K, l≠j} Φ((v-μ_l)/σ_l)`.
//!
//! Normally the whole integrand is integrated once over
//! `[min μ − 10 max σ, max μ + 10 max σ]`, split at the means, with the
//! leave-one-out products from prefix/suffix products so an evaluation costs
//! O(s). When some σ is tiny that window can be far wider than the narrowest
//! feature, so the sum over `j` is instead integrated term by term: term `j`
//! is bounded by the density of `z̃_j`, so it only needs `μ_j ± 10σ_j`, and it
//! is integrated in standardized units split at the other sensors' means.

use rayon::prelude::*;

use super::{ErrorProbReport, Method, TopPProblem, SIGMA_EPSILON};
use crate::error::{Error, Result};
use crate::geometry::{true_top_p, Location};
use crate::normal;
use crate::quadrature::{integrate, QuadConfig};

const WINDOW_SIGMAS: f64 = 10.0;
const TOTAL_TOLERANCE: f64 = 1e-9;
/// The single-pass route is used while its window spans at most this many
/// of the smallest σ̃; beyond that the term-wise route is cheaper and safer.
const DIRECT_MAX_SPAN: f64 = 400.0;
/// Integrand values below this are treated as zero; over a 20σ window the
/// dropped mass stays many orders below the tolerance.
const NEGLIGIBLE: f64 = 1e-17;
/// Largest acceptable estimated quadrature error per hypothesis.
pub const MAX_QUADRATURE_ERROR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrectProbability {
    pub value: f64,
    /// Estimated absolute quadrature error.
    pub error: f64,
    pub evaluations: usize,
}

fn effective_sigma(s: f64) -> f64 {
    if s > 0.0 {
        s
    } else {
        SIGMA_EPSILON
    }
}

/// `P(min_{i∈K} z̃_i > v)` for independent Gaussians.
pub fn min_survival(v: f64, means: &[f64], sigmas: &[f64]) -> f64 {
    means
        .iter()
        .zip(sigmas)
        .map(|(&m, &s)| normal::sf((v - m) / effective_sigma(s)))
        .product()
}

/// Density of `max_j z̃_j` at `v` for independent Gaussians.
pub fn max_density(v: f64, means: &[f64], sigmas: &[f64]) -> f64 {
    (0..means.len())
        .map(|j| {
            let sj = effective_sigma(sigmas[j]);
            let dens = normal::pdf((v - means[j]) / sj) / sj;
            let rest: f64 = (0..means.len())
                .filter(|&l| l != j)
                .map(|l| normal::cdf((v - means[l]) / effective_sigma(sigmas[l])))
                .product();
            dens * rest
        })
        .sum()
}

/// Probability that the max-value rule returns the true top-p set of `h`.
pub fn conditional_correct_corollary1(problem: &TopPProblem, h: &Location) -> Result<CorrectProbability> {
    let s = problem.map().len();
    let p = problem.p();
    if p == s {
        return Ok(CorrectProbability {
            value: 1.0,
            error: 0.0,
            evaluations: 0,
        });
    }
    let top = true_top_p(problem.map(), h, p)?;
    let mu = problem.means(h);
    let sigma: Vec<f64> = problem.sigma_tilde().iter().map(|&v| effective_sigma(v)).collect();
    let inside: Vec<usize> = top.ranked().to_vec();
    let outside: Vec<usize> = (0..s).filter(|i| !top.contains(*i)).collect();

    let ctx = |e: Error| e.context(format!("hypothesis ({}, {})", h.x, h.y));
    let (lo, hi) = direct_window(&mu, &sigma);
    let min_sigma = sigma.iter().copied().fold(f64::INFINITY, f64::min);
    let (value, error, evaluations) = if hi - lo <= DIRECT_MAX_SPAN * min_sigma {
        direct(&mu, &sigma, &inside, &outside).map_err(ctx)?
    } else {
        term_wise(&mu, &sigma, &inside, &outside).map_err(ctx)?
    };
    if error > MAX_QUADRATURE_ERROR {
        return Err(Error::Numerical {
            message: format!("quadrature error too large at hypothesis ({}, {})", h.x, h.y),
            estimated_error: error,
            evaluations,
        });
    }
    Ok(CorrectProbability {
        value: value.clamp(0.0, 1.0),
        error,
        evaluations,
    })
}

/// Integrates each `j ∉ K` term separately in `t = (v − μ_j)/σ_j`.
fn term_wise(mu: &[f64], sigma: &[f64], inside: &[usize], outside: &[usize]) -> Result<(f64, f64, usize)> {
    let term_tol = TOTAL_TOLERANCE / outside.len() as f64;
    let mut value = 0.0;
    let mut error = 0.0;
    let mut evaluations = 0;
    for &j in outside {
        let (mj, sj) = (mu[j], sigma[j]);
        // integrate in t = (v - μ_j)/σ_j so tiny σ_j does not collapse the
        // window below floating-point resolution
        let term = |t: f64| -> f64 {
            let mut acc = normal::pdf(t);
            for &i in inside {
                if acc < NEGLIGIBLE {
                    return 0.0;
                }
                acc *= normal::sf(((mj - mu[i]) + sj * t) / sigma[i]);
            }
            for &l in outside {
                if l != j {
                    if acc < NEGLIGIBLE {
                        return 0.0;
                    }
                    acc *= normal::cdf(((mj - mu[l]) + sj * t) / sigma[l]);
                }
            }
            acc
        };
        let (lo, hi) = (-WINDOW_SIGMAS, WINDOW_SIGMAS);
        let mut cuts: Vec<f64> = (0..mu.len())
            .filter(|&i| i != j)
            .map(|i| (mu[i] - mj) / sj)
            .filter(|&c| c > lo && c < hi)
            .collect();
        cuts.push(lo);
        cuts.push(hi);
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let span = hi - lo;
        for w in cuts.windows(2) {
            let cfg = QuadConfig {
                tolerance: term_tol * (w[1] - w[0]) / span,
                ..QuadConfig::default()
            };
            let r = integrate(&term, w[0], w[1], &cfg).map_err(|e| e.context(format!("outside sensor {j}")))?;
            value += r.value;
            error += r.error;
            evaluations += r.evaluations;
        }
    }
    Ok((value, error, evaluations))
}

fn direct_window(mu: &[f64], sigma: &[f64]) -> (f64, f64) {
    let max_sigma = sigma.iter().copied().fold(0.0, f64::max);
    let lo = mu.iter().copied().fold(f64::INFINITY, f64::min) - WINDOW_SIGMAS * max_sigma;
    let hi = mu.iter().copied().fold(f64::NEG_INFINITY, f64::max) + WINDOW_SIGMAS * max_sigma;
    (lo, hi)
}

/// Integrates the full integrand once over `v`.
fn direct(mu: &[f64], sigma: &[f64], inside: &[usize], outside: &[usize]) -> Result<(f64, f64, usize)> {
    let n_out = outside.len();
    let integrand = |v: f64| -> f64 {
        let mut surv = 1.0;
        for &i in inside {
            surv *= normal::sf((v - mu[i]) / sigma[i]);
            if surv < NEGLIGIBLE {
                return 0.0;
            }
        }
        // leave-one-out products of the outside CDFs
        let cdf: Vec<f64> = outside.iter().map(|&l| normal::cdf((v - mu[l]) / sigma[l])).collect();
        let mut dens = 0.0;
        let mut prefix = 1.0;
        let mut suffix = vec![1.0; n_out + 1];
        for k in (0..n_out).rev() {
            suffix[k] = suffix[k + 1] * cdf[k];
        }
        for (k, &j) in outside.iter().enumerate() {
            let zj = (v - mu[j]) / sigma[j];
            dens += normal::pdf(zj) / sigma[j] * prefix * suffix[k + 1];
            prefix *= cdf[k];
        }
        surv * dens
    };
    let (lo, hi) = direct_window(mu, sigma);
    let min_sigma = sigma.iter().copied().fold(f64::INFINITY, f64::min);
    let mut cuts: Vec<f64> = mu.iter().copied().filter(|&c| c > lo && c < hi).collect();
    cuts.push(lo);
    cuts.push(hi);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let span = hi - lo;
    let (mut value, mut error, mut evaluations) = (0.0, 0.0, 0);
    for w in cuts.windows(2) {
        let cfg = QuadConfig {
            tolerance: TOTAL_TOLERANCE * (w[1] - w[0]) / span,
            // no starting panel wider than the narrowest density
            initial_panels: ((w[1] - w[0]) / min_sigma).ceil().max(2.0) as usize,
            ..QuadConfig::default()
        };
        let r = integrate(&integrand, w[0], w[1], &cfg)?;
        value += r.value;
        error += r.error;
        evaluations += r.evaluations;
    }
    Ok((value, error, evaluations))
}

/// Error probability under a uniform prior over the grid, by quadrature.
pub fn error_prob_corollary1(problem: &TopPProblem) -> Result<ErrorProbReport> {
    let grid = problem.grid();
    if grid.is_empty() {
        return Err(Error::param("hypothesis grid is empty"));
    }
    let per: Vec<CorrectProbability> = grid
        .points()
        .par_iter()
        .map(|h| conditional_correct_corollary1(problem, h))
        .collect::<Result<_>>()?;
    let n = per.len() as f64;
    let mean_correct = per.iter().map(|c| c.value).sum::<f64>() / n;
    let uncertainty = per.iter().map(|c| c.error).sum::<f64>() / n;
    Ok(ErrorProbReport {
        p_error: (1.0 - mean_correct).clamp(0.0, 1.0),
        method: Method::Quadrature,
        uncertainty,
        per_hypothesis: Some(per.into_iter().map(|c| c.value).collect()),
    })
}
