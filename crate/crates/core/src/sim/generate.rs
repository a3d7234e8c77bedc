use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Area, DeploymentMap, Location};
use crate::seed::rng_from_seed;

/// `s` sensors placed independently and uniformly in `area`.
pub fn random_deployment(s: usize, area: Area, seed: u64) -> Result<DeploymentMap> {
    if s == 0 {
        return Err(Error::param("deployment needs at least one sensor"));
    }
    let mut rng = rng_from_seed(seed);
    let sensors = (0..s).map(|_| uniform_point(&mut rng, &area)).collect();
    DeploymentMap::new(sensors, area)
}

pub(crate) fn uniform_point(rng: &mut crate::seed::Rng, area: &Area) -> Location {
    Location::new(
        area.min.x + rng.random::<f64>() * area.width(),
        area.min.y + rng.random::<f64>() * area.height(),
    )
}

/// Constant-speed walk along a polyline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySpec {
    pub waypoints: Vec<Location>,
    /// Meters per second.
    pub speed: f64,
    /// Seconds per tick.
    pub tick: f64,
}

/// Position at every tick while the walk lasts; the first sample is the
/// first waypoint.
pub fn waypoint_trajectory(spec: &TrajectorySpec) -> Result<Vec<(u64, Location)>> {
    if spec.waypoints.len() < 2 {
        return Err(Error::param("a trajectory needs at least two waypoints"));
    }
    if !(spec.speed > 0.0 && spec.speed.is_finite()) || !(spec.tick > 0.0 && spec.tick.is_finite()) {
        return Err(Error::param("speed and tick must be positive"));
    }
    let lengths: Vec<f64> = spec.waypoints.windows(2).map(|w| w[0].distance(&w[1])).collect();
    let total: f64 = lengths.iter().sum();
    if !(total > 0.0) {
        return Err(Error::param("trajectory has zero length"));
    }
    let step = spec.speed * spec.tick;
    // slack so a path that is an exact multiple of the step keeps its endpoint
    let slack = 1e-9 * total;
    let mut out = Vec::new();
    let mut seg = 0;
    let mut seg_start = 0.0;
    for n in 0u64.. {
        let s = n as f64 * step;
        if s > total + slack {
            break;
        }
        let s = s.min(total);
        while seg + 1 < lengths.len() && s > seg_start + lengths[seg] {
            seg_start += lengths[seg];
            seg += 1;
        }
        let (a, b) = (spec.waypoints[seg], spec.waypoints[seg + 1]);
        let u = if lengths[seg] > 0.0 {
            ((s - seg_start) / lengths[seg]).clamp(0.0, 1.0)
        } else {
            0.0
        };
        out.push((n, Location::new(a.x + u * (b.x - a.x), a.y + u * (b.y - a.y))));
    }
    Ok(out)
}
