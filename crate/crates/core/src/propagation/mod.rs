//! RSS propagation models: fitting, likelihoods and synthetic measurements.

mod loglinear;
mod spline;

pub use loglinear::{fit_log_linear, LogLinearModel};
pub use spline::{fit_spline, SplineModel, CONTINUITY_TOLERANCE};

use std::path::Path;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{read_json, write_json, Error, Result};
use crate::geometry::{floored_distance, DeploymentMap, Location};
use crate::measurement::MeasurementFrame;
use crate::normal;
use crate::seed::rng_from_seed;

/// Smallest variance (dB²) any likelihood is evaluated with.
pub const VARIANCE_FLOOR: f64 = 1e-6;

/// Propagation model for one sensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum SensorModel {
    LogLinear(LogLinearModel),
    Spline(SplineModel),
}

impl From<LogLinearModel> for SensorModel {
    fn from(m: LogLinearModel) -> Self {
        SensorModel::LogLinear(m)
    }
}

impl From<SplineModel> for SensorModel {
    fn from(m: SplineModel) -> Self {
        SensorModel::Spline(m)
    }
}

impl SensorModel {
    /// Mean reading in dB at distance `d` (floored).
    pub fn mean_rss(&self, d: f64) -> f64 {
        match self {
            SensorModel::LogLinear(m) => m.mean(d),
            SensorModel::Spline(m) => m.mean(d),
        }
    }

    /// Noise std dev used when simulating readings at distance `d`.
    pub fn noise_std(&self, d: f64) -> f64 {
        match self {
            SensorModel::LogLinear(m) => m.sigma(),
            SensorModel::Spline(m) => m.variance(d).sqrt(),
        }
    }

    /// Variance used by the likelihood, never below [`VARIANCE_FLOOR`].
    pub fn variance(&self, d: f64) -> f64 {
        match self {
            SensorModel::LogLinear(m) => (m.sigma() * m.sigma()).max(VARIANCE_FLOOR),
            SensorModel::Spline(m) => m.variance(d),
        }
    }

    pub fn log_likelihood(&self, z: f64, d: f64) -> f64 {
        normal::log_density(z, self.mean_rss(d), self.variance(d))
    }

    pub fn likelihood(&self, z: f64, d: f64) -> f64 {
        self.log_likelihood(z, d).exp()
    }
}

/// One model per sensor, in sensor order. Serialized as a JSON array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PropagationModel {
    sensors: Vec<SensorModel>,
}

impl PropagationModel {
    pub fn new(sensors: Vec<SensorModel>) -> Result<Self> {
        if sensors.is_empty() {
            return Err(Error::param("propagation model needs at least one sensor"));
        }
        Ok(Self { sensors })
    }

    /// The same model for each of `s` sensors.
    pub fn uniform(entry: SensorModel, s: usize) -> Result<Self> {
        Self::new(vec![entry; s])
    }

    pub fn len(&self) -> usize {
        self.sensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sensors.is_empty()
    }

    pub fn sensor(&self, i: usize) -> &SensorModel {
        &self.sensors[i]
    }

    pub fn entries(&self) -> &[SensorModel] {
        &self.sensors
    }

    pub(crate) fn check_matches(&self, map: &DeploymentMap) -> Result<()> {
        if self.len() != map.len() {
            return Err(Error::param(format!(
                "model has {} sensor entries, deployment has {} sensors",
                self.len(),
                map.len()
            )));
        }
        Ok(())
    }

    /// Normalized noise std devs; fails unless every entry is log-linear.
    pub fn sigma_tilde(&self) -> Result<Vec<f64>> {
        self.sensors
            .iter()
            .enumerate()
            .map(|(i, m)| match m {
                SensorModel::LogLinear(l) => Ok(l.sigma_tilde()),
                SensorModel::Spline(_) => Err(Error::Unsupported(format!(
                    "sensor {i} uses a spline model, which has no normalization"
                ))),
            })
            .collect()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let m: Self = read_json(path)?;
        Self::new(m.sensors)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }
}

/// Power sum of dB values: `10 log10(Σ 10^(v/10))`.
pub fn superpose_db(values: &[f64]) -> f64 {
    let peak = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !peak.is_finite() {
        return peak;
    }
    let sum: f64 = values.iter().map(|v| 10f64.powf((v - peak) / 10.0)).sum();
    peak + 10.0 * sum.log10()
}

/// Index of the target with the largest mean at one sensor (lowest on ties).
pub(crate) fn dominant(means: &[f64]) -> usize {
    let mut best = 0;
    for (r, &m) in means.iter().enumerate().skip(1) {
        if m > means[best] {
            best = r;
        }
    }
    best
}

/// Simulates one frame of readings.
///
/// With one target each reading is the model mean plus Gaussian noise. With
/// several, per-target powers are summed in the linear domain before noise is
/// added; the noise level is that of the target dominating the sensor.
pub fn sample_measurements(
    model: &PropagationModel,
    map: &DeploymentMap,
    targets: &[Location],
    t: u64,
    seed: u64,
) -> Result<MeasurementFrame> {
    model.check_matches(map)?;
    if targets.is_empty() {
        return Err(Error::param("at least one target is required"));
    }
    let mut rng = rng_from_seed(seed);
    let mut z = Vec::with_capacity(map.len());
    let mut means = vec![0.0; targets.len()];
    for (i, sensor) in map.sensors().iter().enumerate() {
        let entry = model.sensor(i);
        let dists: Vec<f64> = targets.iter().map(|t| floored_distance(sensor, t)).collect();
        for (m, &d) in means.iter_mut().zip(&dists) {
            *m = entry.mean_rss(d);
        }
        let mean = superpose_db(&means);
        let std = entry.noise_std(dists[dominant(&means)]);
        let eps: f64 = StandardNormal.sample(&mut rng);
        z.push(mean + std * eps);
    }
    MeasurementFrame::new(t, z, Some(targets.to_vec()))
}
