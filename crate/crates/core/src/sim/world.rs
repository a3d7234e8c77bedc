//! Synthetic worlds: ground-truth spline propagation per sensor, a training
//! set drawn from it, and the models fitted on that training set.

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{DeploymentMap, HypothesisGrid};
use crate::propagation::{fit_log_linear, fit_spline, LogLinearModel, PropagationModel, SensorModel, SplineModel};
use crate::seed::{derive_seed, rng_from_seed};

/// Which propagation model the inference side uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelChoice {
    /// Splines fitted on the training set.
    Fitted,
    /// The generating splines themselves.
    Truth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldSpec {
    /// Hypothesis grid rows and columns covering the area.
    pub grid: [usize; 2],
    /// Bins of both the generating and the fitted splines.
    pub bins: usize,
    /// Training samples per sensor.
    pub train_samples: usize,
    /// Range of per-bin noise standard deviations, dB.
    pub noise_db: [f64; 2],
    /// Range of the 1 m intercepts, dB.
    pub p0_db: [f64; 2],
    /// Range of per-bin path-loss exponents.
    pub eta: [f64; 2],
    pub model: ModelChoice,
}

impl Default for WorldSpec {
    fn default() -> Self {
        Self {
            grid: [20, 20],
            bins: 8,
            train_samples: 400,
            noise_db: [2.0, 4.0],
            p0_db: [-45.0, -35.0],
            eta: [1.5, 3.5],
            model: ModelChoice::Fitted,
        }
    }
}

impl WorldSpec {
    pub fn validate(&self) -> Result<()> {
        if self.grid[0] == 0 || self.grid[1] == 0 {
            return Err(Error::param("grid dimensions must be positive"));
        }
        if self.bins == 0 {
            return Err(Error::param("bins must be positive"));
        }
        if self.train_samples < 2 * self.bins + 1 {
            return Err(Error::param(format!(
                "train_samples must be at least {} for {} bins",
                2 * self.bins + 1,
                self.bins
            )));
        }
        let range_ok = |r: [f64; 2]| r[0].is_finite() && r[1].is_finite() && r[0] <= r[1];
        if !range_ok(self.noise_db) || self.noise_db[0] < 0.0 {
            return Err(Error::param("noise_db must be a non-negative [lo, hi] range"));
        }
        if !range_ok(self.p0_db) {
            return Err(Error::param("p0_db must be a [lo, hi] range"));
        }
        if !range_ok(self.eta) || self.eta[0] <= 0.0 {
            return Err(Error::param("eta must be a positive [lo, hi] range"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticWorld {
    pub map: DeploymentMap,
    pub grid: HypothesisGrid,
    /// Generates every measurement.
    pub truth: PropagationModel,
    /// Used by the Bayesian algorithms.
    pub inference: PropagationModel,
    /// Log-linear fits used by the max-value baseline.
    pub baseline: Vec<LogLinearModel>,
}

/// Nearest distance used for generating splines and training samples.
const NEAR_M: f64 = 1.0;

fn draw(rng: &mut crate::seed::Rng, r: [f64; 2]) -> f64 {
    r[0] + rng.random::<f64>() * (r[1] - r[0])
}

/// Builds the generating models, samples training data and fits on it.
///
/// Random streams: `derive_seed(seed, 0)` for the generating models,
/// `derive_seed(seed, 1 + i)` for sensor `i`'s training set.
pub fn build_world(map: DeploymentMap, spec: &WorldSpec, seed: u64) -> Result<SyntheticWorld> {
    spec.validate()?;
    let area = *map.area();
    let grid = HypothesisGrid::covering(&area, spec.grid[0], spec.grid[1])?;
    let far = (area.width().hypot(area.height()) * 1.05).max(2.0 * NEAR_M);
    let (lo, hi) = (NEAR_M.log10(), far.log10());
    let edges: Vec<f64> = (0..=spec.bins)
        .map(|w| 10f64.powf(lo + (hi - lo) * w as f64 / spec.bins as f64))
        .collect();

    let mut rng = rng_from_seed(derive_seed(seed, 0));
    let truth: Vec<SplineModel> = (0..map.len())
        .map(|_| {
            let p0 = draw(&mut rng, spec.p0_db);
            let eta: Vec<f64> = (0..spec.bins).map(|_| draw(&mut rng, spec.eta)).collect();
            let var: Vec<f64> = (0..spec.bins)
                .map(|_| {
                    draw(&mut rng, spec.noise_db)
                        .powi(2)
                        .max(crate::propagation::VARIANCE_FLOOR)
                })
                .collect();
            SplineModel::continuous(edges.clone(), p0, eta, var)
        })
        .collect::<Result<_>>()?;

    let mut fitted = Vec::with_capacity(map.len());
    let mut baseline = Vec::with_capacity(map.len());
    for (i, m) in truth.iter().enumerate() {
        let mut rng = rng_from_seed(derive_seed(seed, 1 + i as u64));
        let samples: Vec<(f64, f64)> = (0..spec.train_samples)
            .map(|_| {
                let d = 10f64.powf(lo + rng.random::<f64>() * (hi - lo));
                let eps: f64 = StandardNormal.sample(&mut rng);
                (d, m.mean(d) + m.variance(d).sqrt() * eps)
            })
            .collect();
        let ctx = |e: Error| e.context(format!("sensor {i}"));
        fitted.push(SensorModel::from(fit_spline(&samples, spec.bins).map_err(ctx)?));
        baseline.push(fit_log_linear(&samples).map_err(ctx)?);
    }
    let truth = PropagationModel::new(truth.into_iter().map(SensorModel::from).collect())?;
    let inference = match spec.model {
        ModelChoice::Fitted => PropagationModel::new(fitted)?,
        ModelChoice::Truth => truth.clone(),
    };
    Ok(SyntheticWorld {
        map,
        grid,
        truth,
        inference,
        baseline,
    })
}
