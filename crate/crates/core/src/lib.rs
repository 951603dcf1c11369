//! Online projected gradient descent for table-tennis return policies.
//!
//! A two-dimensional interception policy (base yaw and racket roll at the
//! moment of impact) is tuned from one observed landing point per iteration.
//! The gradient of the landing point with respect to the policy comes from a
//! model: either a first-principles grey-box predictor with exact chain-rule
//! Jacobians, or a small tanh MLP trained on observed returns. A simulated
//! environment with deliberate model mismatch and landing noise replaces the
//! physical robot.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod arm;
pub mod artifact;
pub mod ballistics;
pub mod blackbox;
pub mod error;
pub mod greybox;
pub mod harness;
pub mod impact;
pub mod metrics;
pub mod optimizer;
pub mod sim_env;

pub use arm::{ArmGeometry, InterceptionEvent, InterceptionPolicy, Sample, Trajectory};
pub use ballistics::{BallState, FlightParams, LandingRecord};
pub use blackbox::{Dataset, MlpModel, TrainConfig};
pub use error::{Error, Result};
pub use greybox::GreyboxParams;
pub use harness::{ExperimentConfig, Mode, PredictorKind};
pub use impact::ImpactParams;
pub use optimizer::{FeasibleSet, LandingModel, RunConfig, RunLog, StepSchedule};
pub use sim_env::EnvConfig;

/// Default integration step of the grey-box predictor [s].
pub const PREDICTOR_DT: f64 = 1e-3;

/// Default integration step of the simulated ground truth [s].
pub const TRUTH_DT: f64 = 2e-4;
