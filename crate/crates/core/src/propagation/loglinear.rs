use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::D_MIN;

/// `z = p0 - eta * 10 log10(d) + N(0, sigma^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawLogLinear", into = "RawLogLinear")]
pub struct LogLinearModel {
    p0: f64,
    eta: f64,
    sigma: f64,
}

#[derive(Serialize, Deserialize)]
struct RawLogLinear {
    p0: f64,
    eta: f64,
    sigma: f64,
}

impl TryFrom<RawLogLinear> for LogLinearModel {
    type Error = Error;

    fn try_from(r: RawLogLinear) -> Result<Self> {
        LogLinearModel::new(r.p0, r.eta, r.sigma)
    }
}

impl From<LogLinearModel> for RawLogLinear {
    fn from(m: LogLinearModel) -> Self {
        RawLogLinear {
            p0: m.p0,
            eta: m.eta,
            sigma: m.sigma,
        }
    }
}

impl LogLinearModel {
    pub fn new(p0: f64, eta: f64, sigma: f64) -> Result<Self> {
        if !p0.is_finite() {
            return Err(Error::param("p0 must be finite"));
        }
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::param(format!("path-loss slope must be positive, got {eta}")));
        }
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::param(format!("noise std must be non-negative, got {sigma}")));
        }
        Ok(Self { p0, eta, sigma })
    }

    pub fn p0(&self) -> f64 {
        self.p0
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn mean(&self, d: f64) -> f64 {
        self.p0 - self.eta * 10.0 * d.max(D_MIN).log10()
    }

    /// Maps a raw reading onto the unit-slope, zero-intercept scale.
    pub fn normalize(&self, z: f64) -> f64 {
        (z - self.p0) / self.eta
    }

    /// Noise std dev after normalization.
    pub fn sigma_tilde(&self) -> f64 {
        self.sigma / self.eta
    }
}

pub(crate) fn validate_samples(samples: &[(f64, f64)]) -> Result<()> {
    for (k, &(d, z)) in samples.iter().enumerate() {
        if !d.is_finite() || d < D_MIN {
            return Err(Error::Fit(format!(
                "sample {k}: distance {d} below the {D_MIN} m floor"
            )));
        }
        if !z.is_finite() {
            return Err(Error::Fit(format!("sample {k}: reading is not finite")));
        }
    }
    Ok(())
}

/// Ordinary least squares of `rss` on `-10 log10(d)`.
pub fn fit_log_linear(samples: &[(f64, f64)]) -> Result<LogLinearModel> {
    if samples.len() < 2 {
        return Err(Error::Fit(format!("need at least 2 samples, got {}", samples.len())));
    }
    validate_samples(samples)?;
    let n = samples.len() as f64;
    let u: Vec<f64> = samples.iter().map(|&(d, _)| -10.0 * d.log10()).collect();
    let mean_u = u.iter().sum::<f64>() / n;
    let mean_z = samples.iter().map(|&(_, z)| z).sum::<f64>() / n;
    let mut suu = 0.0;
    let mut suz = 0.0;
    for (&ui, &(_, z)) in u.iter().zip(samples) {
        suu += (ui - mean_u) * (ui - mean_u);
        suz += (ui - mean_u) * (z - mean_z);
    }
    if suu <= 1e-12 * n * (1.0 + mean_u * mean_u) {
        return Err(Error::Fit("all sample distances are equal".into()));
    }
    let eta = suz / suu;
    let p0 = mean_z - eta * mean_u;
    let sigma = if samples.len() >= 3 {
        let rss: f64 = u
            .iter()
            .zip(samples)
            .map(|(&ui, &(_, z))| {
                let r = z - (p0 + eta * ui);
                r * r
            })
            .sum();
        (rss / (n - 2.0)).sqrt()
    } else {
        0.0
    };
    LogLinearModel::new(p0, eta, sigma).map_err(|e| Error::Fit(e.to_string()))
}
