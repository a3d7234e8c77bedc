//! Top-p sensor selection for RSS-based target localization.
//!
//! Given readings from `s` sensors, recommend a set of sensors expected to
//! contain the `p` sensors nearest the target(s). The crate provides
//!
//! * propagation models (log-linear and continuity-constrained splines),
//! * the normalized max-value rule and its exact error probability,
//! * Bayesian list construction over a hypothesis grid for one target and,
//!   with synchronized local grids, for several,
//! * a seeded experiment harness and trace ingestion.

pub mod bayes_multi;
pub mod bayes_single;
pub mod error;
pub mod geometry;
pub mod ingest;
pub mod maxsel;
pub mod measurement;
pub mod metrics;
pub mod normal;
pub mod propagation;
pub mod quadrature;
pub mod seed;
pub mod sim;

pub use error::{Error, Result};
pub use geometry::{
    floored_distance, true_top_p, Area, DeploymentMap, GridSpec, HypothesisGrid, Location, TopPSet, D_MIN,
};
pub use measurement::MeasurementFrame;
pub use metrics::{containment_success, empirical_accuracy};
pub use propagation::{
    fit_log_linear, fit_spline, sample_measurements, LogLinearModel, PropagationModel, SensorModel, SplineModel,
};
