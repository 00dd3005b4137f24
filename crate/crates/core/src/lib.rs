//! Estimation of a smooth change point in the intensity of an
//! inhomogeneous Poisson process observed over `n` independent windows.
//!
//! The intensity family is `λ_θ(t) = ψ(t) + r·ramp_δ(t - θ)`: a baseline
//! plus a linear transition of height `r` and width `δ` starting at `θ`.
//! The crate provides simulation, likelihood and estimator computation,
//! the limit processes of the normalized estimators, and a Monte Carlo
//! experiment harness.

// `!(x > 0.0)` deliberately rejects NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimators;
pub mod harness;
pub mod intensity;
pub mod likelihood;
pub mod limits;
pub mod optimize;
pub mod quadrature;
pub mod rng;
pub mod sampler;
pub mod schedule;
pub mod stats;

pub use error::{Error, Result};
pub use estimators::{bayes_estimate, estimate, mle, EstimateResult, Prior};
pub use harness::{
    emit_report, run_experiment, run_replication, Analysis, ExperimentConfig, ExperimentReport, ReplicationResult,
};
pub use intensity::{Baseline, IntensityModel, LimitLevels};
pub use likelihood::{log_likelihood, log_lr, LogLikelihood};
pub use limits::{sample_limit, LimitDraw, LimitKind, LimitSummary};
pub use sampler::{sample_observations, SampleSet, Trajectory};
pub use schedule::{DeltaRule, RateSchedule, Regime};
