//! Bayesian list construction for one target.
//!
//! Each frame gets a fresh uniform prior over the grid. The posterior is kept
//! in the log domain; the `k` highest-posterior grid points each contribute
//! their `m` nearest sensors and the recommendation is the union.

use std::collections::BTreeSet;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{floored_distance, top_k, true_top_p, DeploymentMap, HypothesisGrid, Location};
use crate::measurement::MeasurementFrame;
use crate::metrics::{binomial_standard_error, containment_success};
use crate::propagation::PropagationModel;

/// Normalized log-posterior over a list of hypotheses.
#[derive(Debug, Clone, PartialEq)]
pub struct Posterior {
    log_weights: Vec<f64>,
    normalized: bool,
}

/// `log Σ exp(v)`, `-inf` for an empty or all `-inf` input.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let peak = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !peak.is_finite() {
        return peak;
    }
    peak + values.iter().map(|v| (v - peak).exp()).sum::<f64>().ln()
}

impl Posterior {
    /// Normalizes unnormalized log weights.
    pub fn from_log_weights(mut log_weights: Vec<f64>) -> Result<Self> {
        let total = log_sum_exp(&log_weights);
        if !total.is_finite() {
            return Err(Error::Inference(
                "every hypothesis has zero or undefined likelihood".into(),
            ));
        }
        for w in &mut log_weights {
            *w -= total;
        }
        Ok(Self {
            log_weights,
            normalized: true,
        })
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn len(&self) -> usize {
        self.log_weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_weights.is_empty()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.log_weights.iter().map(|w| w.exp()).collect()
    }

    /// Indices of the `k` most probable hypotheses, best first.
    pub fn top(&self, k: usize) -> Vec<usize> {
        top_k(&self.log_weights, k)
    }

    /// Index of the most probable hypothesis.
    pub fn map_estimate(&self) -> usize {
        self.top(1)[0]
    }
}

/// Sum of per-sensor log-likelihoods for a target at `h`.
pub(crate) fn log_likelihood_at(model: &PropagationModel, map: &DeploymentMap, z: &[f64], h: &Location) -> f64 {
    map.sensors()
        .iter()
        .zip(z)
        .enumerate()
        .map(|(i, (s, &zi))| model.sensor(i).log_likelihood(zi, floored_distance(s, h)))
        .sum()
}

/// Posterior over the grid under a uniform prior.
pub fn posterior_update(
    model: &PropagationModel,
    map: &DeploymentMap,
    grid: &HypothesisGrid,
    frame: &MeasurementFrame,
) -> Result<Posterior> {
    posterior_over(model, map, grid.points(), frame)
}

/// Posterior restricted to an arbitrary list of hypotheses.
pub fn posterior_over(
    model: &PropagationModel,
    map: &DeploymentMap,
    points: &[Location],
    frame: &MeasurementFrame,
) -> Result<Posterior> {
    model.check_matches(map)?;
    frame.check_len(map.len())?;
    if points.is_empty() {
        return Err(Error::param("no hypotheses to score"));
    }
    let weights: Vec<f64> = points
        .par_iter()
        .map(|h| log_likelihood_at(model, map, &frame.z, h))
        .collect();
    Posterior::from_log_weights(weights)
}

/// `(k, m)`: hypotheses kept, sensors taken per hypothesis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ListParams {
    pub k: usize,
    pub m: usize,
}

impl ListParams {
    pub fn new(k: usize, m: usize) -> Result<Self> {
        if k == 0 || m == 0 {
            return Err(Error::param("k and m must be positive"));
        }
        Ok(Self { k, m })
    }

    pub(crate) fn check(&self, hypotheses: usize, sensors: usize) -> Result<()> {
        if self.k == 0 || self.k > hypotheses {
            return Err(Error::param(format!("k = {} outside 1..={hypotheses}", self.k)));
        }
        if self.m == 0 || self.m > sensors {
            return Err(Error::param(format!("m = {} outside 1..={sensors}", self.m)));
        }
        Ok(())
    }
}

/// Recommended sensors plus diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionResult {
    pub sensors: BTreeSet<usize>,
    /// Sensors in the order they were first added.
    pub ranked: Vec<usize>,
    /// Chosen hypothesis indices, best first.
    pub hypotheses: Vec<usize>,
    /// Posterior mass of the chosen hypotheses.
    pub posterior_mass: f64,
}

impl SelectionResult {
    pub fn set_size(&self) -> usize {
        self.sensors.len()
    }

    pub(crate) fn push_all(&mut self, ids: &[usize]) {
        for &i in ids {
            if self.sensors.insert(i) {
                self.ranked.push(i);
            }
        }
    }
}

/// Union of the `m` nearest sensors to each of the `k` best hypotheses.
pub fn construct_list(
    posterior: &Posterior,
    map: &DeploymentMap,
    grid: &HypothesisGrid,
    params: ListParams,
) -> Result<SelectionResult> {
    if posterior.len() != grid.len() {
        return Err(Error::param("posterior and grid sizes differ"));
    }
    construct_list_over(posterior, map, grid.points(), params)
}

pub(crate) fn construct_list_over(
    posterior: &Posterior,
    map: &DeploymentMap,
    points: &[Location],
    params: ListParams,
) -> Result<SelectionResult> {
    params.check(points.len(), map.len())?;
    let chosen = posterior.top(params.k);
    let mut out = SelectionResult {
        sensors: BTreeSet::new(),
        ranked: Vec::new(),
        hypotheses: chosen.clone(),
        posterior_mass: chosen.iter().map(|&h| posterior.log_weights()[h].exp()).sum(),
    };
    for &h in &chosen {
        let near = true_top_p(map, &points[h], params.m)?;
        out.push_all(near.ranked());
    }
    Ok(out)
}

/// Accuracy and average set size over a run of frames.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub accuracy: f64,
    pub mean_set_size: f64,
    /// Standard error of `accuracy` (plus-two adjusted).
    pub standard_error: f64,
    pub frames: usize,
    pub outcomes: Vec<bool>,
    pub set_sizes: Vec<usize>,
}

impl RunSummary {
    pub(crate) fn from_outcomes(outcomes: Vec<bool>, set_sizes: Vec<usize>) -> Result<Self> {
        let accuracy = crate::metrics::empirical_accuracy(&outcomes)?;
        let hits = outcomes.iter().filter(|&&b| b).count() as u64;
        let mean_set_size = set_sizes.iter().sum::<usize>() as f64 / set_sizes.len() as f64;
        Ok(Self {
            accuracy,
            mean_set_size,
            standard_error: binomial_standard_error(hits, outcomes.len() as u64),
            frames: outcomes.len(),
            outcomes,
            set_sizes,
        })
    }
}

/// Runs list construction on every frame and scores it against the frame's
/// ground truth.
pub fn run_single_target(
    model: &PropagationModel,
    map: &DeploymentMap,
    grid: &HypothesisGrid,
    frames: &[MeasurementFrame],
    params: ListParams,
    p: usize,
) -> Result<RunSummary> {
    if frames.is_empty() {
        return Err(Error::param("no frames to run"));
    }
    params.check(grid.len(), map.len())?;
    if p == 0 || p > map.len() {
        return Err(Error::param(format!("p = {p} outside 1..={}", map.len())));
    }
    let scored: Vec<(bool, usize)> = frames
        .par_iter()
        .map(|f| {
            let truth = f.truth_or_err()?;
            let post = posterior_update(model, map, grid, f)?;
            let sel = construct_list(&post, map, grid, params)?;
            let truths = truth
                .iter()
                .map(|t| true_top_p(map, t, p))
                .collect::<Result<Vec<_>>>()?;
            Ok((containment_success(&truths, &sel.sensors), sel.set_size()))
        })
        .collect::<Result<_>>()?;
    let (outcomes, sizes) = scored.into_iter().unzip();
    RunSummary::from_outcomes(outcomes, sizes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Area;
    use crate::propagation::{sample_measurements, LogLinearModel, SensorModel};
    use crate::seed::rng_from_seed;
    use proptest::prelude::*;
    use rand::Rng;

    fn setup(sigma: f64) -> (PropagationModel, DeploymentMap, HypothesisGrid) {
        let area = Area::new(Location::new(0.0, 0.0), Location::new(100.0, 100.0)).unwrap();
        let mut rng = rng_from_seed(2024);
        let sensors = (0..8)
            .map(|_| Location::new(rng.random::<f64>() * 100.0, rng.random::<f64>() * 100.0))
            .collect();
        let map = DeploymentMap::new(sensors, area).unwrap();
        let grid = HypothesisGrid::covering(&area, 10, 10).unwrap();
        let entry: SensorModel = LogLinearModel::new(-20.0, 2.5, sigma).unwrap().into();
        (PropagationModel::uniform(entry, 8).unwrap(), map, grid)
    }

    #[test]
    fn one_point_grid_has_unit_mass() {
        let (model, map, _) = setup(2.0);
        let grid = HypothesisGrid::new(Location::new(50.0, 50.0), 1.0, 1, 1).unwrap();
        let f = sample_measurements(&model, &map, &[Location::new(10.0, 10.0)], 0, 1).unwrap();
        let post = posterior_update(&model, &map, &grid, &f).unwrap();
        assert!((post.probabilities()[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn flat_likelihood_gives_uniform_posterior() {
        let post = Posterior::from_log_weights(vec![-1234.5; 7]).unwrap();
        for p in post.probabilities() {
            // the shared offset costs a few ulps of 1234.5
            assert!((p - 1.0 / 7.0).abs() < 1e-12);
        }
    }

    #[test]
    fn log_domain_matches_direct_product() {
        let (model, map, _) = setup(3.0);
        let points: Vec<Location> = (0..5).map(|k| Location::new(10.0 + 15.0 * k as f64, 40.0)).collect();
        let f = sample_measurements(&model, &map, &[Location::new(35.0, 45.0)], 0, 9).unwrap();
        let post = posterior_over(&model, &map, &points, &f).unwrap();
        let direct: Vec<f64> = points
            .iter()
            .map(|h| {
                (0..map.len())
                    .map(|i| model.sensor(i).likelihood(f.z[i], floored_distance(&map.sensor(i), h)))
                    .product::<f64>()
            })
            .collect();
        let total: f64 = direct.iter().sum();
        for (a, b) in post.probabilities().iter().zip(&direct) {
            assert!((a - b / total).abs() < 1e-12);
        }
    }

    #[test]
    fn log_sum_is_log_of_product() {
        let (model, map, _) = setup(3.0);
        let mut rng = rng_from_seed(77);
        for _ in 0..20 {
            let h = Location::new(rng.random::<f64>() * 100.0, rng.random::<f64>() * 100.0);
            let z: Vec<f64> = (0..8).map(|_| -60.0 + rng.random::<f64>() * 30.0).collect();
            let sum = log_likelihood_at(&model, &map, &z, &h);
            let prod: f64 = (0..8)
                .map(|i| model.sensor(i).likelihood(z[i], floored_distance(&map.sensor(i), &h)))
                .product();
            assert!((sum - prod.ln()).abs() < 1e-12 * sum.abs().max(1.0));
        }
    }

    #[test]
    fn k1_m1_is_nearest_to_map() {
        let (model, map, grid) = setup(2.0);
        let f = sample_measurements(&model, &map, &[Location::new(60.0, 20.0)], 0, 4).unwrap();
        let post = posterior_update(&model, &map, &grid, &f).unwrap();
        let sel = construct_list(&post, &map, &grid, ListParams::new(1, 1).unwrap()).unwrap();
        let nearest = true_top_p(&map, &grid.point(post.map_estimate()), 1).unwrap();
        assert_eq!(sel.sensors, nearest.indices());
    }

    #[test]
    fn full_union_is_everything() {
        let (model, map, grid) = setup(2.0);
        let f = sample_measurements(&model, &map, &[Location::new(60.0, 20.0)], 0, 4).unwrap();
        let post = posterior_update(&model, &map, &grid, &f).unwrap();
        let sel = construct_list(&post, &map, &grid, ListParams::new(grid.len(), 8).unwrap()).unwrap();
        assert_eq!(sel.sensors, (0..8).collect());
        assert!((sel.posterior_mass - 1.0).abs() < 1e-9);
    }

    #[test]
    fn params_validated() {
        let (model, map, grid) = setup(2.0);
        let f = sample_measurements(&model, &map, &[Location::new(60.0, 20.0)], 0, 4).unwrap();
        let post = posterior_update(&model, &map, &grid, &f).unwrap();
        assert!(construct_list(&post, &map, &grid, ListParams { k: 1, m: 9 }).is_err());
        assert!(construct_list(&post, &map, &grid, ListParams { k: 101, m: 1 }).is_err());
        assert!(ListParams::new(0, 1).is_err());
    }

    #[test]
    fn missing_truth_rejected() {
        let (model, map, grid) = setup(2.0);
        let f = MeasurementFrame::new(0, vec![-50.0; 8], None).unwrap();
        let err = run_single_target(&model, &map, &grid, &[f], ListParams::new(1, 2).unwrap(), 1);
        assert!(matches!(err, Err(Error::Parameter(_))));
    }

    #[test]
    fn noiseless_on_grid_targets_are_always_contained() {
        let (model, map, grid) = setup(0.0);
        let frames: Vec<MeasurementFrame> = (0..grid.len())
            .map(|h| sample_measurements(&model, &map, &[grid.point(h)], h as u64, h as u64).unwrap())
            .collect();
        for p in 1..=3 {
            for m in p..=5 {
                let r = run_single_target(&model, &map, &grid, &frames, ListParams::new(1, m).unwrap(), p).unwrap();
                assert_eq!(r.accuracy, 1.0, "p={p} m={m}");
                assert_eq!(r.mean_set_size, m as f64);
            }
        }
    }

    #[test]
    fn output_too_small_never_succeeds() {
        let (model, map, grid) = setup(1.0);
        let frames: Vec<MeasurementFrame> = (0..20)
            .map(|h| sample_measurements(&model, &map, &[grid.point(h * 5)], 0, h as u64).unwrap())
            .collect();
        let r = run_single_target(&model, &map, &grid, &frames, ListParams::new(1, 2).unwrap(), 3).unwrap();
        assert_eq!(r.accuracy, 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn set_size_bounds_and_monotonicity(seed in 0u64..10_000, k in 1usize..6, m in 1usize..8) {
            let (model, map, grid) = setup(4.0);
            let mut rng = rng_from_seed(seed);
            let t = Location::new(rng.random::<f64>() * 100.0, rng.random::<f64>() * 100.0);
            let f = sample_measurements(&model, &map, &[t], 0, seed).unwrap();
            let post = posterior_update(&model, &map, &grid, &f).unwrap();
            let sel = construct_list(&post, &map, &grid, ListParams::new(k, m).unwrap()).unwrap();
            prop_assert!(sel.set_size() <= k * m);
            if k == 1 { prop_assert_eq!(sel.set_size(), m); }
            let more_m = construct_list(&post, &map, &grid, ListParams::new(k, m + 1).unwrap()).unwrap();
            let more_k = construct_list(&post, &map, &grid, ListParams::new(k + 1, m).unwrap()).unwrap();
            prop_assert!(sel.sensors.is_subset(&more_m.sensors));
            prop_assert!(sel.sensors.is_subset(&more_k.sensors));
        }

        #[test]
        fn posterior_invariant_to_likelihood_scale(seed in 0u64..10_000, shift in -500.0f64..500.0) {
            let weights: Vec<f64> = {
                let mut rng = rng_from_seed(seed);
                (0..30).map(|_| -100.0 * rng.random::<f64>()).collect()
            };
            let a = Posterior::from_log_weights(weights.clone()).unwrap();
            let b = Posterior::from_log_weights(weights.iter().map(|w| w + shift).collect()).unwrap();
            for (x, y) in a.probabilities().iter().zip(b.probabilities()) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }

        #[test]
        fn list_depends_only_on_top_k_order(seed in 0u64..10_000, k in 1usize..5) {
            let (_, map, grid) = setup(1.0);
            let mut rng = rng_from_seed(seed);
            let w: Vec<f64> = (0..grid.len()).map(|_| -50.0 * rng.random::<f64>()).collect();
            let a = Posterior::from_log_weights(w.clone()).unwrap();
            let top = a.top(k);
            // push everything outside the top k further down and spread the top k apart
            let floor = top.iter().map(|&h| w[h]).fold(f64::INFINITY, f64::min);
            let mut w2: Vec<f64> = w.iter().map(|&v| if v < floor { v - 10.0 } else { v }).collect();
            for (rank, &h) in top.iter().enumerate() {
                w2[h] = 100.0 - rank as f64;
            }
            let b = Posterior::from_log_weights(w2).unwrap();
            let params = ListParams::new(k, 3).unwrap();
            let sa = construct_list(&a, &map, &grid, params).unwrap();
            let sb = construct_list(&b, &map, &grid, params).unwrap();
            prop_assert_eq!(sa.sensors, sb.sensors);
        }
    }
}
