use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::{ErrorProbReport, Method, TopPProblem};
use crate::error::{Error, Result};
use crate::geometry::true_top_p;
use crate::metrics::binomial_standard_error;
use crate::seed::{derive_seed, rng_from_seed};

/// Trials per independently seeded chunk. Fixed so results do not depend on
/// the thread count.
const CHUNK: u64 = 1 << 16;

/// Simulates the max-value rule: draw a grid point uniformly, draw readings,
/// select the `p` largest, and count mismatches with the true top-p set.
pub fn empirical_error(problem: &TopPProblem, trials: u64, seed: u64) -> Result<ErrorProbReport> {
    if trials == 0 {
        return Err(Error::param("trials must be at least 1"));
    }
    let grid = problem.grid();
    if grid.is_empty() {
        return Err(Error::param("hypothesis grid is empty"));
    }
    let s = problem.map().len();
    let p = problem.p();
    let sigma = problem.sigma_tilde();
    let means: Vec<Vec<f64>> = grid.points().iter().map(|h| problem.means(h)).collect();
    let member: Vec<Vec<bool>> = grid
        .points()
        .iter()
        .map(|h| {
            let top = true_top_p(problem.map(), h, p)?;
            Ok((0..s).map(|i| top.contains(i)).collect())
        })
        .collect::<Result<_>>()?;

    let chunks = trials.div_ceil(CHUNK);
    let errors: u64 = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let n = CHUNK.min(trials - c * CHUNK);
            let mut rng = rng_from_seed(derive_seed(seed, c));
            let mut z = vec![0.0; s];
            let mut order: Vec<usize> = (0..s).collect();
            let mut wrong = 0u64;
            for _ in 0..n {
                let hi = rng.random_range(0..grid.len());
                let mu = &means[hi];
                for k in 0..s {
                    let eps: f64 = StandardNormal.sample(&mut rng);
                    z[k] = mu[k] + sigma[k] * eps;
                }
                if p < s {
                    for (k, o) in order.iter_mut().enumerate() {
                        *o = k;
                    }
                    // same total order as `top_p_select`: larger first, then lower index
                    order.select_nth_unstable_by(p - 1, |&a, &b| z[b].total_cmp(&z[a]).then(a.cmp(&b)));
                    if !order[..p].iter().all(|&i| member[hi][i]) {
                        wrong += 1;
                    }
                }
            }
            wrong
        })
        .collect::<Vec<u64>>()
        .into_iter()
        .sum();

    Ok(ErrorProbReport {
        p_error: errors as f64 / trials as f64,
        method: Method::EmpiricalMc,
        uncertainty: binomial_standard_error(errors, trials),
        per_hypothesis: None,
    })
}
