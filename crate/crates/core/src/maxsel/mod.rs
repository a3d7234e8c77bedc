//! The normalized max-value rule: pick the `p` sensors with the largest
//! normalized readings, and compute how often that equals the true top-p set.
//!
//! Three routes to the error probability are provided:
//!
//! * [`error_prob_corollary1`]: one-dimensional integral per hypothesis,
//!   conditioning on the largest reading outside the true set.
//! * [`error_prob_theorem1`]: the `p(s-p)`-dimensional difference vector and
//!   its orthant probability, estimated by Monte Carlo.
//! * [`empirical_error`]: direct simulation of the rule.

mod empirical;
mod integral;
mod orthant;

pub use empirical::empirical_error;
pub use integral::{
    conditional_correct_corollary1, error_prob_corollary1, max_density, min_survival, CorrectProbability,
};
pub use orthant::{covariance_factored, covariance_indicator, difference_matrix, difference_mean, error_prob_theorem1};

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{top_k, DeploymentMap, HypothesisGrid, Location, TopPSet};
use crate::propagation::LogLinearModel;

/// Noise std devs of exactly zero are replaced by this inside integrals.
pub const SIGMA_EPSILON: f64 = 1e-12;

/// Normalized mean reading `-10 log10(d)` (distance floored).
pub fn normalized_mean(map: &DeploymentMap, h: &Location) -> Vec<f64> {
    map.distances(h).into_iter().map(|d| -10.0 * d.log10()).collect()
}

#[derive(Debug, Clone)]
pub struct TopPProblem {
    map: DeploymentMap,
    grid: HypothesisGrid,
    sigma_tilde: Vec<f64>,
    p: usize,
}

impl TopPProblem {
    pub fn new(map: DeploymentMap, grid: HypothesisGrid, sigma_tilde: Vec<f64>, p: usize) -> Result<Self> {
        if sigma_tilde.len() != map.len() {
            return Err(Error::param(format!(
                "{} noise levels for {} sensors",
                sigma_tilde.len(),
                map.len()
            )));
        }
        if let Some(i) = sigma_tilde.iter().position(|s| !(*s >= 0.0 && s.is_finite())) {
            return Err(Error::param(format!("noise level {i} must be non-negative")));
        }
        if p == 0 || p > map.len() {
            return Err(Error::param(format!("p = {p} outside 1..={}", map.len())));
        }
        Ok(Self {
            map,
            grid,
            sigma_tilde,
            p,
        })
    }

    /// Same noise level at every sensor.
    pub fn uniform(map: DeploymentMap, grid: HypothesisGrid, sigma: f64, p: usize) -> Result<Self> {
        let s = map.len();
        Self::new(map, grid, vec![sigma; s], p)
    }

    pub fn map(&self) -> &DeploymentMap {
        &self.map
    }

    pub fn grid(&self) -> &HypothesisGrid {
        &self.grid
    }

    pub fn sigma_tilde(&self) -> &[f64] {
        &self.sigma_tilde
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn with_p(&self, p: usize) -> Result<Self> {
        Self::new(self.map.clone(), self.grid.clone(), self.sigma_tilde.clone(), p)
    }

    pub fn with_sigma(&self, sigma_tilde: Vec<f64>) -> Result<Self> {
        Self::new(self.map.clone(), self.grid.clone(), sigma_tilde, self.p)
    }

    pub fn means(&self, h: &Location) -> Vec<f64> {
        normalized_mean(&self.map, h)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "corollary1-quadrature")]
    Quadrature,
    #[serde(rename = "theorem1-orthant-mc")]
    OrthantMc,
    #[serde(rename = "empirical-mc")]
    EmpiricalMc,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Quadrature => "corollary1-quadrature",
            Method::OrthantMc => "theorem1-orthant-mc",
            Method::EmpiricalMc => "empirical-mc",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorProbReport {
    pub p_error: f64,
    pub method: Method,
    /// Absolute numerical (quadrature) or statistical (standard error) uncertainty.
    pub uncertainty: f64,
    /// Probability of a correct selection at each grid point, when computed.
    pub per_hypothesis: Option<Vec<f64>>,
}

impl ErrorProbReport {
    pub fn accuracy(&self) -> f64 {
        1.0 - self.p_error
    }
}

/// Indices of the `p` largest normalized readings (lowest index on ties).
pub fn top_p_select(z_tilde: &[f64], p: usize) -> Result<TopPSet> {
    if p == 0 || p > z_tilde.len() {
        return Err(Error::param(format!("p = {p} outside 1..={}", z_tilde.len())));
    }
    Ok(TopPSet::from_ranked(top_k(z_tilde, p)))
}

/// The max-value baseline: normalize raw readings with per-sensor log-linear
/// models and keep the `m` largest.
pub fn max_value_list(models: &[LogLinearModel], z: &[f64], m: usize) -> Result<TopPSet> {
    if models.len() != z.len() {
        return Err(Error::param("one log-linear model per reading is required"));
    }
    let zt: Vec<f64> = models.iter().zip(z).map(|(md, &v)| md.normalize(v)).collect();
    top_p_select(&zt, m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    #[test]
    fn select_examples() {
        assert_eq!(
            top_p_select(&[3.0, 1.0, 2.0], 2).unwrap().indices(),
            BTreeSet::from([0, 2])
        );
        assert_eq!(
            top_p_select(&[3.0, 1.0, 2.0], 3).unwrap().indices(),
            BTreeSet::from([0, 1, 2])
        );
        assert_eq!(top_p_select(&[1.0, 1.0, 0.0], 1).unwrap().ranked(), &[0]);
        assert!(top_p_select(&[1.0], 0).is_err());
        assert!(top_p_select(&[1.0], 2).is_err());
    }

    #[test]
    fn baseline_normalizes_before_ranking() {
        let models = [
            LogLinearModel::new(0.0, 1.0, 1.0).unwrap(),
            LogLinearModel::new(-40.0, 4.0, 1.0).unwrap(),
        ];
        // raw -10 vs -48; normalized -10 vs -2
        let set = max_value_list(&models, &[-10.0, -48.0], 1).unwrap();
        assert_eq!(set.ranked(), &[1]);
    }

    proptest! {
        #[test]
        fn select_equals_best_subset_sum(z in prop::collection::vec(-50.0f64..50.0, 1..=8), p_frac in 0.0f64..1.0) {
            let s = z.len();
            let p = 1 + ((s - 1) as f64 * p_frac) as usize;
            let chosen = top_p_select(&z, p).unwrap().indices();
            let chosen_sum: f64 = chosen.iter().map(|&i| z[i]).sum();
            let mut best = f64::NEG_INFINITY;
            for mask in 0u32..(1 << s) {
                if mask.count_ones() as usize != p { continue; }
                let sum: f64 = (0..s).filter(|i| mask >> i & 1 == 1).map(|i| z[i]).sum();
                best = best.max(sum);
            }
            prop_assert!((chosen_sum - best).abs() < 1e-9);
        }
    }
}
