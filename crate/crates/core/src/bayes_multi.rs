//! Multi-target list construction over synchronized local grids.
//!
//! Every `t_sync` ticks the per-target local grids are re-centered at the true
//! locations (snapped to the base grid). Between synchronizations each grid
//! grows following a side schedule. Per tick, the posterior is computed over
//! the product of the local grids with readings modeled as the linear-power sum
//! of every target's contribution.

use std::collections::BTreeSet;

use rayon::prelude::*;

use crate::bayes_single::{ListParams, Posterior, RunSummary, SelectionResult};
use crate::error::{Error, Result};
use crate::geometry::{floored_distance, true_top_p, DeploymentMap, HypothesisGrid, Location};
use crate::measurement::MeasurementFrame;
use crate::metrics::containment_success;
use crate::normal;
use crate::propagation::{dominant, superpose_db, PropagationModel};

/// Default limit on the number of joint hypotheses scored per tick.
pub const DEFAULT_CAP: usize = 1_000_000;

/// A block of base-grid points, kept in base-grid (row-major) order.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalGrid {
    indices: Vec<usize>,
    points: Vec<Location>,
}

impl LocalGrid {
    /// Indices into the base grid.
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn points(&self) -> &[Location] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// The `side × side` block of `base` centered at the grid point nearest
/// `center`, clipped to the grid.
pub fn local_grid(center: &Location, side: usize, base: &HypothesisGrid) -> Result<LocalGrid> {
    if side == 0 || side.is_multiple_of(2) {
        return Err(Error::param(format!(
            "local grid side must be odd and positive, got {side}"
        )));
    }
    let (row, col) = base.nearest_cell(center);
    let half = side / 2;
    let rows = row.saturating_sub(half)..=(row + half).min(base.rows() - 1);
    let cols = col.saturating_sub(half)..=(col + half).min(base.cols() - 1);
    let mut indices = Vec::with_capacity(side * side);
    for r in rows {
        for c in cols.clone() {
            indices.push(base.index(r, c));
        }
    }
    let points = indices.iter().map(|&i| base.point(i)).collect();
    Ok(LocalGrid { indices, points })
}

/// One location per target.
#[derive(Debug, Clone, PartialEq)]
pub struct JointHypothesis {
    pub components: Vec<Location>,
}

/// Mean reading at sensor `i` with every target of `h` present.
pub fn superposed_mean(model: &PropagationModel, map: &DeploymentMap, h: &JointHypothesis, i: usize) -> f64 {
    let s = map.sensor(i);
    let means: Vec<f64> = h
        .components
        .iter()
        .map(|c| model.sensor(i).mean_rss(floored_distance(&s, c)))
        .collect();
    superpose_db(&means)
}

/// Log-likelihood of readings `z` given joint hypothesis `h`. The variance at
/// each sensor is the one of the target contributing the most power there.
pub fn joint_log_likelihood(model: &PropagationModel, map: &DeploymentMap, z: &[f64], h: &JointHypothesis) -> f64 {
    let mut means = vec![0.0; h.components.len()];
    let mut dists = vec![0.0; h.components.len()];
    let mut total = 0.0;
    for (i, s) in map.sensors().iter().enumerate() {
        let entry = model.sensor(i);
        for (r, c) in h.components.iter().enumerate() {
            dists[r] = floored_distance(s, c);
            means[r] = entry.mean_rss(dists[r]);
        }
        let var = entry.variance(dists[dominant(&means)]);
        total += normal::log_density(z[i], superpose_db(&means), var);
    }
    total
}

/// Posterior over the product of local grids.
///
/// Joint hypotheses are flattened lexicographically, target 0 most
/// significant: flat index `Σ_r idx_r · Π_{r' > r} n_{r'}`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointPosterior {
    sizes: Vec<usize>,
    posterior: Posterior,
}

impl JointPosterior {
    pub fn posterior(&self) -> &Posterior {
        &self.posterior
    }

    /// Local grid sizes, one per target.
    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn len(&self) -> usize {
        self.posterior.len()
    }

    pub fn is_empty(&self) -> bool {
        self.posterior.is_empty()
    }

    /// Per-target local indices of flat index `flat`.
    pub fn decode(&self, flat: usize) -> Vec<usize> {
        decode(&self.sizes, flat)
    }
}

fn decode(sizes: &[usize], mut flat: usize) -> Vec<usize> {
    let mut out = vec![0; sizes.len()];
    for (r, &n) in sizes.iter().enumerate().rev() {
        out[r] = flat % n;
        flat /= n;
    }
    out
}

fn product_size(grids: &[LocalGrid], cap: usize) -> Result<usize> {
    let mut size = 1usize;
    for g in grids {
        size = size.saturating_mul(g.len());
    }
    if size > cap {
        return Err(Error::Capacity { size, cap });
    }
    Ok(size)
}

/// Normalized posterior over every joint hypothesis in
/// `grids[0] × … × grids[N-1]`.
pub fn joint_posterior(
    model: &PropagationModel,
    map: &DeploymentMap,
    grids: &[LocalGrid],
    frame: &MeasurementFrame,
    cap: usize,
) -> Result<JointPosterior> {
    model.check_matches(map)?;
    frame.check_len(map.len())?;
    if grids.is_empty() {
        return Err(Error::param("at least one target grid is required"));
    }
    if grids.iter().any(LocalGrid::is_empty) {
        return Err(Error::param("local grids must not be empty"));
    }
    let total = product_size(grids, cap)?;
    let n = grids.len();
    let s = map.len();

    // per target, per local point, per sensor: (mean, variance)
    let tables: Vec<Vec<Vec<(f64, f64)>>> = grids
        .iter()
        .map(|g| {
            g.points()
                .iter()
                .map(|h| {
                    map.sensors()
                        .iter()
                        .enumerate()
                        .map(|(i, sp)| {
                            let d = floored_distance(sp, h);
                            let e = model.sensor(i);
                            (e.mean_rss(d), e.variance(d))
                        })
                        .collect()
                })
                .collect()
        })
        .collect();

    let sizes: Vec<usize> = grids.iter().map(LocalGrid::len).collect();
    let weights: Vec<f64> = (0..total)
        .into_par_iter()
        .map(|flat| {
            let idx = decode(&sizes, flat);
            let mut means = vec![0.0; n];
            let mut acc = 0.0;
            for i in 0..s {
                for r in 0..n {
                    means[r] = tables[r][idx[r]][i].0;
                }
                let dom = dominant(&means);
                let var = tables[dom][idx[dom]][i].1;
                acc += normal::log_density(frame.z[i], superpose_db(&means), var);
            }
            acc
        })
        .collect();
    Ok(JointPosterior {
        sizes,
        posterior: Posterior::from_log_weights(weights)?,
    })
}

/// Union of the `m` nearest sensors to every component of the `k` best joint
/// hypotheses. `k` is reduced to the number of joint hypotheses if larger.
pub fn construct_joint_list(
    posterior: &JointPosterior,
    map: &DeploymentMap,
    grids: &[LocalGrid],
    params: ListParams,
) -> Result<SelectionResult> {
    if grids.len() != posterior.sizes().len() {
        return Err(Error::param(
            "posterior and local grids disagree on the number of targets",
        ));
    }
    let k = params.k.min(posterior.len());
    ListParams::new(k, params.m)?.check(posterior.len(), map.len())?;
    let chosen = posterior.posterior().top(k);
    let lw = posterior.posterior().log_weights();
    let mut out = SelectionResult {
        sensors: BTreeSet::new(),
        ranked: Vec::new(),
        hypotheses: chosen.clone(),
        posterior_mass: chosen.iter().map(|&h| lw[h].exp()).sum(),
    };
    for &flat in &chosen {
        for (r, li) in posterior.decode(flat).into_iter().enumerate() {
            let near = true_top_p(map, &grids[r].points()[li], params.m)?;
            out.push_all(near.ranked());
        }
    }
    Ok(out)
}

/// Synchronization and grid-growth settings.
#[derive(Debug, Clone, PartialEq)]
pub struct SyncConfig {
    /// Ticks between re-centerings at the true locations.
    pub t_sync: u64,
    /// Ticks between steps of the side schedule.
    pub t_inc: u64,
    /// Local grid side (points) for each step; odd and non-decreasing.
    pub side_schedule: Vec<usize>,
    /// Largest joint hypothesis space scored per tick.
    pub cap: usize,
}

/// Sides 3, 5, …, 27 (up to 729 points per target).
pub fn default_side_schedule() -> Vec<usize> {
    (1..=13).map(|q| 2 * q + 1).collect()
}

impl SyncConfig {
    /// Defaults: `t_inc` 2 ticks (2 s at one tick per second), sides 3..27,
    /// cap 10^6.
    pub fn new(t_sync: u64) -> Self {
        Self {
            t_sync,
            t_inc: 2,
            side_schedule: default_side_schedule(),
            cap: DEFAULT_CAP,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.t_sync == 0 {
            return Err(Error::param("t_sync must be at least 1"));
        }
        if self.t_inc == 0 {
            return Err(Error::param("t_inc must be at least 1"));
        }
        if self.side_schedule.is_empty() {
            return Err(Error::param("side schedule is empty"));
        }
        if self.side_schedule.iter().any(|&b| b == 0 || b % 2 == 0) {
            return Err(Error::param("side schedule entries must be odd and positive"));
        }
        if self.side_schedule.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::param("side schedule must be non-decreasing"));
        }
        if self.cap == 0 {
            return Err(Error::param("cap must be positive"));
        }
        Ok(())
    }

    /// Side in use `q` ticks after the last synchronization; the last entry
    /// repeats once the schedule runs out.
    pub fn side(&self, q: u64) -> usize {
        let step = (q / self.t_inc).min(self.side_schedule.len() as u64 - 1);
        self.side_schedule[step as usize]
    }
}

/// Grid state carried between ticks.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalGridState {
    pub centers: Vec<Location>,
    /// Ticks since the last synchronization.
    pub q: u64,
}

/// Outcome of a multi-target run.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiRunSummary {
    pub summary: RunSummary,
    /// Frames seen before the first synchronization tick, which have no grid.
    pub skipped: usize,
}

/// Runs the synchronized local-grid tracker over `frames` (in strictly
/// increasing tick order). Frames before the first synchronization tick have
/// no grid and yield `None`.
pub fn track_multi_target(
    model: &PropagationModel,
    map: &DeploymentMap,
    base: &HypothesisGrid,
    frames: &[MeasurementFrame],
    params: ListParams,
    sync: &SyncConfig,
) -> Result<Vec<Option<SelectionResult>>> {
    sync.validate()?;
    ListParams::new(params.k, params.m)?;
    if params.m > map.len() {
        return Err(Error::param(format!("m = {} outside 1..={}", params.m, map.len())));
    }
    if frames.windows(2).any(|w| w[1].t <= w[0].t) {
        return Err(Error::param("frames must be strictly increasing in tick"));
    }
    let mut state: Option<(LocalGridState, u64)> = None;
    let mut out = Vec::with_capacity(frames.len());
    for f in frames {
        let truth = f.truth_or_err()?;
        if f.t % sync.t_sync == 0 {
            let st = LocalGridState {
                centers: truth.to_vec(),
                q: 0,
            };
            state = Some((st, f.t));
        }
        let Some((st, synced_at)) = state.as_mut() else {
            out.push(None);
            continue;
        };
        st.q = f.t - *synced_at;
        let side = sync.side(st.q);
        let grids = st
            .centers
            .iter()
            .map(|c| local_grid(c, side, base))
            .collect::<Result<Vec<_>>>()?;
        let ctx = |e: Error| e.context(format!("tick {}", f.t));
        let post = joint_posterior(model, map, &grids, f, sync.cap).map_err(ctx)?;
        out.push(Some(construct_joint_list(&post, map, &grids, params).map_err(ctx)?));
    }
    Ok(out)
}

/// Tracks and scores containment of the union of every target's true top-p
/// set.
pub fn run_multi_target(
    model: &PropagationModel,
    map: &DeploymentMap,
    base: &HypothesisGrid,
    frames: &[MeasurementFrame],
    params: ListParams,
    p: usize,
    sync: &SyncConfig,
) -> Result<MultiRunSummary> {
    if p == 0 || p > map.len() {
        return Err(Error::param(format!("p = {p} outside 1..={}", map.len())));
    }
    if frames.is_empty() {
        return Err(Error::param("no frames to run"));
    }
    let picks = track_multi_target(model, map, base, frames, params, sync)?;
    let mut outcomes = Vec::new();
    let mut sizes = Vec::new();
    for (f, pick) in frames.iter().zip(&picks) {
        let Some(sel) = pick else { continue };
        outcomes.push(score_frame(map, f, sel, p)?);
        sizes.push(sel.set_size());
    }
    if outcomes.is_empty() {
        return Err(Error::param("no frame falls on or after a synchronization tick"));
    }
    let skipped = frames.len() - outcomes.len();
    if skipped > 0 {
        log::warn!("skipped {skipped} frames before the first synchronization tick");
    }
    Ok(MultiRunSummary {
        summary: RunSummary::from_outcomes(outcomes, sizes)?,
        skipped,
    })
}

/// Whether `sel` contains the true top-p set of every target of `frame`.
pub fn score_frame(map: &DeploymentMap, frame: &MeasurementFrame, sel: &SelectionResult, p: usize) -> Result<bool> {
    let truths = frame
        .truth_or_err()?
        .iter()
        .map(|t| true_top_p(map, t, p))
        .collect::<Result<Vec<_>>>()?;
    Ok(containment_success(&truths, &sel.sensors))
}
