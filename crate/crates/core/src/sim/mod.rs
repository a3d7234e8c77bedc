//! Seeded experiment harness: deployments, trajectories, synthetic worlds
//! and scenario sweeps.
//!
//! All randomness derives from the spec's root seed through
//! [`crate::seed::derive_seed`]; results never depend on the thread count.

mod generate;
mod run;
mod spec;
mod world;

pub use generate::{random_deployment, waypoint_trajectory, TrajectorySpec};
pub use run::{
    crossing_trajectories, multi_target_episode, run_experiment, single_target_frame, Manifest, ResultTable, SweepRow,
};
pub use spec::{
    apply_override, parse_override, DeploymentSource, ErrorMethod, ExperimentSpec, Scenario, Sweep, DEFAULT_SEED,
};
pub use world::{build_world, ModelChoice, SyntheticWorld, WorldSpec};
