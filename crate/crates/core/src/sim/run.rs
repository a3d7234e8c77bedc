use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::generate::{random_deployment, uniform_point, waypoint_trajectory, TrajectorySpec};
use super::spec::{DeploymentSource, ErrorMethod, ExperimentSpec, Scenario};
use super::world::{build_world, SyntheticWorld};
use crate::bayes_multi::{default_side_schedule, score_frame, track_multi_target, SyncConfig, DEFAULT_CAP};
use crate::bayes_single::{construct_list, posterior_update, ListParams};
use crate::error::{Error, Result};
use crate::geometry::{true_top_p, DeploymentMap, HypothesisGrid, Location};
use crate::maxsel::{empirical_error, error_prob_corollary1, error_prob_theorem1, max_value_list, TopPProblem};
use crate::measurement::MeasurementFrame;
use crate::metrics::{binomial_standard_error, containment_success};
use crate::propagation::sample_measurements;
use crate::seed::{derive_seed, rng_from_seed};

// Child streams of the root seed.
const STREAM_DEPLOYMENT: u64 = 0;
const STREAM_WORLD: u64 = 1;
const STREAM_FRAMES: u64 = 2;
const STREAM_MC: u64 = 3;

/// One sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    /// `quadrature`, `orthant-mc`, `empirical`, `bayes` or `max-value`.
    pub method: String,
    pub sigma: Option<f64>,
    pub k: Option<usize>,
    pub m: Option<usize>,
    pub p: usize,
    pub t_sync: Option<u64>,
    pub accuracy: f64,
    pub mean_set_size: f64,
    /// Standard error of `accuracy` (estimated quadrature error for
    /// quadrature rows).
    pub uncertainty: f64,
    /// MC draws, frames or scored ticks behind the row; 0 for quadrature.
    pub trials: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub scenario: Scenario,
    pub rows: Vec<SweepRow>,
}

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(ToString::to_string).unwrap_or_default()
}

impl ResultTable {
    pub fn columns(&self) -> &'static [&'static str] {
        match self.scenario {
            Scenario::AccuracyVsP => &[
                "sigma_tilde",
                "p",
                "method",
                "accuracy",
                "uncertainty",
                "mean_set_size",
                "trials",
            ],
            Scenario::SingleTargetKm | Scenario::SetSizeTradeoff => &[
                "method",
                "k",
                "m",
                "p",
                "accuracy",
                "uncertainty",
                "mean_set_size",
                "trials",
            ],
            Scenario::MultiTargetSync => &[
                "t_sync",
                "p",
                "k",
                "m",
                "accuracy",
                "uncertainty",
                "mean_set_size",
                "trials",
            ],
        }
    }

    /// Writes the table as CSV with a header row.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(self.columns())?;
        for r in &self.rows {
            let cell = |c: &str| -> String {
                match c {
                    "sigma_tilde" => opt(&r.sigma),
                    "p" => r.p.to_string(),
                    "k" => opt(&r.k),
                    "m" => opt(&r.m),
                    "t_sync" => opt(&r.t_sync),
                    "method" => r.method.clone(),
                    "accuracy" => r.accuracy.to_string(),
                    "uncertainty" => r.uncertainty.to_string(),
                    "mean_set_size" => r.mean_set_size.to_string(),
                    "trials" => r.trials.to_string(),
                    _ => unreachable!("unknown column {c}"),
                }
            };
            w.write_record(self.columns().iter().map(|c| cell(c)))?;
        }
        w.flush().map_err(|e| Error::Csv(e.into()))
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }
}

/// Provenance written next to a result table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub scenario: String,
    pub seed: u64,
    /// SHA-256 of the resolved spec (after overrides) as compact JSON.
    pub spec_sha256: String,
    pub version: String,
    pub rows: usize,
    pub spec: ExperimentSpec,
}

impl Manifest {
    pub fn new(spec: &ExperimentSpec, table: &ResultTable) -> Result<Self> {
        let bytes = serde_json::to_vec(spec)?;
        let digest = Sha256::digest(&bytes);
        Ok(Self {
            scenario: spec.scenario.as_str().to_string(),
            seed: spec.seed,
            spec_sha256: digest.iter().map(|b| format!("{b:02x}")).collect(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            rows: table.rows.len(),
            spec: spec.clone(),
        })
    }
}

fn deployment(spec: &ExperimentSpec) -> Result<DeploymentMap> {
    match &spec.deployment {
        DeploymentSource::Random { sensors, area } => {
            random_deployment(*sensors, *area, derive_seed(spec.seed, STREAM_DEPLOYMENT))
        }
        DeploymentSource::File { path } => DeploymentMap::load(path),
    }
}

/// Runs every sweep point of `spec`. Identical specs give identical tables
/// regardless of the thread count.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ResultTable> {
    spec.validate()?;
    let map = deployment(spec)?;
    let rows = match spec.scenario {
        Scenario::AccuracyVsP => accuracy_vs_p(spec, map)?,
        Scenario::SingleTargetKm | Scenario::SetSizeTradeoff => {
            let world = build_world(map, &spec.world, derive_seed(spec.seed, STREAM_WORLD))?;
            single_target(spec, &world)?
        }
        Scenario::MultiTargetSync => {
            let world = build_world(map, &spec.world, derive_seed(spec.seed, STREAM_WORLD))?;
            multi_target(spec, &world)?
        }
    };
    Ok(ResultTable {
        scenario: spec.scenario,
        rows,
    })
}

fn accuracy_vs_p(spec: &ExperimentSpec, map: DeploymentMap) -> Result<Vec<SweepRow>> {
    let grid = HypothesisGrid::covering(map.area(), spec.world.grid[0], spec.world.grid[1])?;
    let points: Vec<(f64, usize)> = spec
        .sweep
        .sigma
        .iter()
        .flat_map(|&s| spec.sweep.p.iter().map(move |&p| (s, p)))
        .collect();
    let mc_root = derive_seed(spec.seed, STREAM_MC);
    points
        .par_iter()
        .enumerate()
        .map(|(n, &(sigma, p))| {
            let ctx = |e: Error| e.context(format!("sigma_tilde = {sigma}, p = {p}"));
            let problem = TopPProblem::uniform(map.clone(), grid.clone(), sigma, p).map_err(ctx)?;
            let seed = derive_seed(mc_root, n as u64);
            let (report, trials) = match spec.sweep.method {
                ErrorMethod::Quadrature => (error_prob_corollary1(&problem), 0),
                ErrorMethod::OrthantMc => (error_prob_theorem1(&problem, spec.trials, seed), spec.trials),
                ErrorMethod::Empirical => (empirical_error(&problem, spec.trials, seed), spec.trials),
            };
            let report = report.map_err(ctx)?;
            Ok(SweepRow {
                method: report.method.as_str().to_string(),
                sigma: Some(sigma),
                k: None,
                m: None,
                p,
                t_sync: None,
                accuracy: report.accuracy(),
                mean_set_size: p as f64,
                uncertainty: report.uncertainty,
                trials,
            })
        })
        .collect()
}

/// Frame `n` of a single-target run: a uniformly placed target and its
/// readings under the generating model.
pub fn single_target_frame(world: &SyntheticWorld, frames_seed: u64, n: u64) -> Result<MeasurementFrame> {
    let seed = derive_seed(frames_seed, n);
    let mut rng = rng_from_seed(seed);
    let target = uniform_point(&mut rng, world.map.area());
    sample_measurements(&world.truth, &world.map, &[target], n, derive_seed(seed, 1))
}

#[derive(Default, Clone)]
struct Tally {
    hits: u64,
    size: u64,
    n: u64,
}

impl Tally {
    fn add(&mut self, hit: bool, size: usize) {
        self.hits += u64::from(hit);
        self.size += size as u64;
        self.n += 1;
    }

    fn merge(mut self, o: &Tally) -> Self {
        self.hits += o.hits;
        self.size += o.size;
        self.n += o.n;
        self
    }

    fn row(&self, method: &str, k: Option<usize>, m: Option<usize>, p: usize, t_sync: Option<u64>) -> SweepRow {
        SweepRow {
            method: method.to_string(),
            sigma: None,
            k,
            m,
            p,
            t_sync,
            accuracy: self.hits as f64 / self.n as f64,
            mean_set_size: self.size as f64 / self.n as f64,
            uncertainty: binomial_standard_error(self.hits, self.n),
            trials: self.n,
        }
    }
}

fn check_axis(values: &[usize], max: usize, name: &str) -> Result<()> {
    match values.iter().find(|&&v| v > max) {
        Some(v) => Err(Error::param(format!("sweep.{name} value {v} exceeds {max}"))),
        None => Ok(()),
    }
}

fn single_target(spec: &ExperimentSpec, world: &SyntheticWorld) -> Result<Vec<SweepRow>> {
    let sw = &spec.sweep;
    let s = world.map.len();
    check_axis(&sw.p, s, "p")?;
    check_axis(&sw.m, s, "m")?;
    check_axis(&sw.k, world.grid.len(), "k")?;
    let km: Vec<(usize, usize)> = sw.k.iter().flat_map(|&k| sw.m.iter().map(move |&m| (k, m))).collect();
    let frames_seed = derive_seed(spec.seed, STREAM_FRAMES);

    // per frame: one posterior, then every (k, m, p) and the baseline
    let per_frame: Vec<(Vec<Tally>, Vec<Tally>)> = (0..spec.trials)
        .into_par_iter()
        .map(|n| {
            let f = single_target_frame(world, frames_seed, n)?;
            let truth = f.truth_or_err()?[0];
            let tops =
                sw.p.iter()
                    .map(|&p| true_top_p(&world.map, &truth, p))
                    .collect::<Result<Vec<_>>>()?;
            let post = posterior_update(&world.inference, &world.map, &world.grid, &f)?;
            let mut bayes = vec![Tally::default(); km.len() * sw.p.len()];
            for (j, &(k, m)) in km.iter().enumerate() {
                let sel = construct_list(&post, &world.map, &world.grid, ListParams::new(k, m)?)?;
                for (pi, top) in tops.iter().enumerate() {
                    bayes[j * sw.p.len() + pi].add(
                        containment_success(std::slice::from_ref(top), &sel.sensors),
                        sel.set_size(),
                    );
                }
            }
            let mut base = vec![Tally::default(); if sw.baseline { sw.m.len() * sw.p.len() } else { 0 }];
            if sw.baseline {
                for (mi, &m) in sw.m.iter().enumerate() {
                    let sel = max_value_list(&world.baseline, &f.z, m)?.indices();
                    for (pi, top) in tops.iter().enumerate() {
                        base[mi * sw.p.len() + pi].add(containment_success(std::slice::from_ref(top), &sel), m);
                    }
                }
            }
            Ok((bayes, base))
        })
        .collect::<Result<_>>()?;

    let fold = |pick: fn(&(Vec<Tally>, Vec<Tally>)) -> &Vec<Tally>, len: usize| -> Vec<Tally> {
        per_frame.iter().fold(vec![Tally::default(); len], |acc, fr| {
            acc.into_iter().zip(pick(fr)).map(|(a, b)| a.merge(b)).collect()
        })
    };
    let bayes = fold(|fr| &fr.0, km.len() * sw.p.len());
    let base = fold(|fr| &fr.1, if sw.baseline { sw.m.len() * sw.p.len() } else { 0 });

    let mut rows = Vec::new();
    for (j, &(k, m)) in km.iter().enumerate() {
        for (pi, &p) in sw.p.iter().enumerate() {
            rows.push(bayes[j * sw.p.len() + pi].row("bayes", Some(k), Some(m), p, None));
        }
    }
    if sw.baseline {
        for (mi, &m) in sw.m.iter().enumerate() {
            for (pi, &p) in sw.p.iter().enumerate() {
                rows.push(base[mi * sw.p.len() + pi].row("max-value", None, Some(m), p, None));
            }
        }
    }
    Ok(rows)
}

/// Two diagonals crossing the area, walked at 3 m/s and sampled once a second.
pub fn crossing_trajectories(map: &DeploymentMap) -> Vec<TrajectorySpec> {
    let a = map.area();
    let at = |u: f64, v: f64| Location::new(a.min.x + u * a.width(), a.min.y + v * a.height());
    vec![
        TrajectorySpec {
            waypoints: vec![at(0.1, 0.1), at(0.9, 0.9)],
            speed: 3.0,
            tick: 1.0,
        },
        TrajectorySpec {
            waypoints: vec![at(0.9, 0.15), at(0.1, 0.85)],
            speed: 3.0,
            tick: 1.0,
        },
    ]
}

/// Frames of one multi-target episode. All episodes share the paths; the
/// measurement noise differs.
pub fn multi_target_episode(
    world: &SyntheticWorld,
    paths: &[Vec<(u64, Location)>],
    episode_seed: u64,
) -> Result<Vec<MeasurementFrame>> {
    let ticks = paths.iter().map(Vec::len).min().unwrap_or(0);
    (0..ticks)
        .map(|n| {
            let targets: Vec<Location> = paths.iter().map(|p| p[n].1).collect();
            sample_measurements(
                &world.truth,
                &world.map,
                &targets,
                n as u64,
                derive_seed(episode_seed, n as u64),
            )
        })
        .collect()
}

fn multi_target(spec: &ExperimentSpec, world: &SyntheticWorld) -> Result<Vec<SweepRow>> {
    let sw = &spec.sweep;
    let s = world.map.len();
    check_axis(&sw.p, s, "p")?;
    check_axis(&sw.m, s, "m")?;
    let trajectories = sw
        .trajectories
        .clone()
        .unwrap_or_else(|| crossing_trajectories(&world.map));
    let paths = trajectories
        .iter()
        .map(waypoint_trajectory)
        .collect::<Result<Vec<_>>>()?;
    let defaults = SyncConfig::new(1);
    let config = |t_sync: u64| SyncConfig {
        t_sync,
        t_inc: sw.t_inc.unwrap_or(defaults.t_inc),
        side_schedule: sw.side_schedule.clone().unwrap_or_else(default_side_schedule),
        cap: sw.cap.unwrap_or(DEFAULT_CAP),
    };
    let frames_root = derive_seed(spec.seed, STREAM_FRAMES);
    let episodes: Vec<Vec<MeasurementFrame>> = (0..spec.trials)
        .into_par_iter()
        .map(|e| multi_target_episode(world, &paths, derive_seed(frames_root, e)))
        .collect::<Result<_>>()?;

    // every sweep point sees the same episodes
    let mut points = Vec::new();
    for &t_sync in &sw.t_sync {
        for &k in &sw.k {
            for &m in &sw.m {
                points.push((t_sync, k, m));
            }
        }
    }
    let tallies: Vec<Vec<Tally>> = points
        .par_iter()
        .map(|&(t_sync, k, m)| {
            let ctx = |e: Error| e.context(format!("t_sync = {t_sync}, k = {k}, m = {m}"));
            let sync = config(t_sync);
            let params = ListParams::new(k, m)?;
            let mut tally = vec![Tally::default(); sw.p.len()];
            for frames in &episodes {
                let picks = track_multi_target(&world.inference, &world.map, &world.grid, frames, params, &sync)
                    .map_err(ctx)?;
                for (f, pick) in frames.iter().zip(&picks) {
                    let Some(sel) = pick else { continue };
                    for (pi, &p) in sw.p.iter().enumerate() {
                        tally[pi].add(score_frame(&world.map, f, sel, p)?, sel.set_size());
                    }
                }
            }
            Ok(tally)
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    for (pi, &p) in sw.p.iter().enumerate() {
        for (&(t_sync, k, m), tally) in points.iter().zip(&tallies) {
            if tally[pi].n == 0 {
                return Err(Error::param("no frame falls on a synchronization tick"));
            }
            rows.push(tally[pi].row("bayes", Some(k), Some(m), p, Some(t_sync)));
        }
    }
    Ok(rows)
}
