//! Experiment specification files.
//!
//! ```json
//! {
//!   "scenario": "single-target-km-sweep",
//!   "seed": 7,
//!   "trials": 500,
//!   "deployment": {"source": "random", "sensors": 10,
//!                  "area": {"min": [0, 0], "max": [140, 140]}},
//!   "world": {"grid": [20, 20], "bins": 8},
//!   "sweep": {"k": [1], "m": [1, 2, 3], "p": [1, 2]}
//! }
//! ```
//!
//! `trials` means MC draws for `fig2-accuracy-vs-p` with a Monte Carlo
//! method, frames for the single-target scenarios and trajectory episodes for
//! `multi-target-sync-sweep`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::generate::TrajectorySpec;
use super::world::WorldSpec;
use crate::error::{Error, Result};
use crate::geometry::Area;

/// Seed used when a spec does not set one.
pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scenario {
    #[serde(rename = "fig2-accuracy-vs-p")]
    AccuracyVsP,
    #[serde(rename = "single-target-km-sweep")]
    SingleTargetKm,
    #[serde(rename = "set-size-tradeoff")]
    SetSizeTradeoff,
    #[serde(rename = "multi-target-sync-sweep")]
    MultiTargetSync,
}

impl Scenario {
    pub fn as_str(&self) -> &'static str {
        match self {
            Scenario::AccuracyVsP => "fig2-accuracy-vs-p",
            Scenario::SingleTargetKm => "single-target-km-sweep",
            Scenario::SetSizeTradeoff => "set-size-tradeoff",
            Scenario::MultiTargetSync => "multi-target-sync-sweep",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase", deny_unknown_fields)]
pub enum DeploymentSource {
    Random { sensors: usize, area: Area },
    File { path: PathBuf },
}

/// Error-probability method for the accuracy-vs-p scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorMethod {
    #[default]
    Quadrature,
    OrthantMc,
    Empirical,
}

/// Sweep axes and scenario options. Axes a scenario does not use must be
/// left empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct Sweep {
    pub sigma: Vec<f64>,
    pub p: Vec<usize>,
    pub k: Vec<usize>,
    pub m: Vec<usize>,
    pub t_sync: Vec<u64>,
    pub method: ErrorMethod,
    /// Also score the max-value baseline (single-target scenarios).
    pub baseline: bool,
    pub t_inc: Option<u64>,
    pub side_schedule: Option<Vec<usize>>,
    pub cap: Option<usize>,
    /// Target paths; defaults to two diagonals crossing the area.
    pub trajectories: Option<Vec<TrajectorySpec>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub scenario: Scenario,
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub trials: u64,
    pub deployment: DeploymentSource,
    #[serde(default)]
    pub world: WorldSpec,
    pub sweep: Sweep,
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

impl ExperimentSpec {
    /// Parses a spec after applying `key=value` overrides; keys are dotted
    /// paths (`sweep.p`, `seed`) and values are JSON, or bare strings.
    pub fn from_json(text: &str, overrides: &[(String, String)]) -> Result<Self> {
        let mut doc: Value = serde_json::from_str(text)?;
        for (k, v) in overrides {
            apply_override(&mut doc, k, v)?;
        }
        let spec: Self = serde_json::from_value(doc)?;
        spec.validate()?;
        Ok(spec)
    }

    /// Reads a spec file; a relative deployment path is taken relative to
    /// the spec's directory.
    pub fn load(path: &Path, overrides: &[(String, String)]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut spec = Self::from_json(&text, overrides).map_err(|e| match e {
            Error::Json(j) => Error::Parse {
                line: j.line() as u64,
                message: format!("{}: {j}", path.display()),
            },
            other => other,
        })?;
        if let DeploymentSource::File { path: dp } = &mut spec.deployment {
            if dp.is_relative() {
                if let Some(dir) = path.parent() {
                    *dp = dir.join(&*dp);
                }
            }
        }
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::param("trials must be at least 1"));
        }
        if let DeploymentSource::Random { sensors: 0, .. } = self.deployment {
            return Err(Error::param("random deployment needs at least one sensor"));
        }
        self.world.validate()?;
        let sw = &self.sweep;
        let need = |name: &str, empty: bool| -> Result<()> {
            if empty {
                Err(Error::param(format!(
                    "sweep.{name} must not be empty for {}",
                    self.scenario.as_str()
                )))
            } else {
                Ok(())
            }
        };
        let forbid = |name: &str, empty: bool| -> Result<()> {
            if empty {
                Ok(())
            } else {
                Err(Error::param(format!(
                    "sweep.{name} is not used by {}",
                    self.scenario.as_str()
                )))
            }
        };
        need("p", sw.p.is_empty())?;
        if sw.p.contains(&0) || sw.k.contains(&0) || sw.m.contains(&0) || sw.t_sync.contains(&0) {
            return Err(Error::param("sweep values of p, k, m and t_sync must be positive"));
        }
        let multi_opts =
            sw.t_inc.is_none() && sw.side_schedule.is_none() && sw.cap.is_none() && sw.trajectories.is_none();
        match self.scenario {
            Scenario::AccuracyVsP => {
                need("sigma", sw.sigma.is_empty())?;
                if sw.sigma.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
                    return Err(Error::param("sweep.sigma values must be finite and non-negative"));
                }
                forbid("k", sw.k.is_empty())?;
                forbid("m", sw.m.is_empty())?;
                forbid("t_sync", sw.t_sync.is_empty())?;
                forbid("baseline", !sw.baseline)?;
                forbid("t_inc/side_schedule/cap/trajectories", multi_opts)?;
            }
            Scenario::SingleTargetKm | Scenario::SetSizeTradeoff => {
                need("k", sw.k.is_empty())?;
                need("m", sw.m.is_empty())?;
                forbid("sigma", sw.sigma.is_empty())?;
                forbid("t_sync", sw.t_sync.is_empty())?;
                forbid("t_inc/side_schedule/cap/trajectories", multi_opts)?;
            }
            Scenario::MultiTargetSync => {
                need("k", sw.k.is_empty())?;
                need("m", sw.m.is_empty())?;
                need("t_sync", sw.t_sync.is_empty())?;
                forbid("sigma", sw.sigma.is_empty())?;
                forbid("baseline", !sw.baseline)?;
                if let Some(t) = &sw.trajectories {
                    if t.is_empty() {
                        return Err(Error::param("sweep.trajectories must not be empty"));
                    }
                }
            }
        }
        if self.scenario != Scenario::AccuracyVsP && sw.method != ErrorMethod::default() {
            return Err(Error::param(format!(
                "sweep.method is not used by {}",
                self.scenario.as_str()
            )));
        }
        Ok(())
    }
}

/// Sets `key` (a dotted path) in `doc` to `raw` parsed as JSON, falling back
/// to a JSON string.
pub fn apply_override(doc: &mut Value, key: &str, raw: &str) -> Result<()> {
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(Error::param(format!("bad override key `{key}`")));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut cur = doc;
    let parts: Vec<&str> = key.split('.').collect();
    for (n, part) in parts.iter().enumerate() {
        let obj = cur
            .as_object_mut()
            .ok_or_else(|| Error::param(format!("override `{key}`: `{part}` is not inside an object")))?;
        if n + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        cur = obj
            .entry(part.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    unreachable!("key has at least one part")
}

/// Splits `key=value`.
pub fn parse_override(s: &str) -> Result<(String, String)> {
    match s.split_once('=') {
        Some((k, v)) if !k.trim().is_empty() => Ok((k.trim().to_string(), v.to_string())),
        _ => Err(Error::param(format!("override `{s}` is not of the form key=value"))),
    }
}
