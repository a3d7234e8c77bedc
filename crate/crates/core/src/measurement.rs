use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Location;

/// RSS readings from every sensor at one tick, plus optional ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementFrame {
    pub t: u64,
    pub z: Vec<f64>,
    /// One location per target, ordered by target id.
    pub truth: Option<Vec<Location>>,
}

impl MeasurementFrame {
    pub fn new(t: u64, z: Vec<f64>, truth: Option<Vec<Location>>) -> Result<Self> {
        if let Some(i) = z.iter().position(|v| !v.is_finite()) {
            return Err(Error::param(format!("reading {i} at tick {t} is not finite")));
        }
        Ok(Self { t, z, truth })
    }

    pub fn sensors(&self) -> usize {
        self.z.len()
    }

    pub(crate) fn check_len(&self, s: usize) -> Result<()> {
        if self.z.len() != s {
            return Err(Error::param(format!(
                "frame at tick {} has {} readings, deployment has {s} sensors",
                self.t,
                self.z.len()
            )));
        }
        Ok(())
    }

    pub(crate) fn truth_or_err(&self) -> Result<&[Location]> {
        match &self.truth {
            Some(t) if !t.is_empty() => Ok(t),
            _ => Err(Error::param(format!("frame at tick {} has no ground truth", self.t))),
        }
    }
}
