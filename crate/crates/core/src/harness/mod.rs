//! Monte Carlo campaigns over a grid of sample sizes.
//!
//! Every replication is a pure function of `(config, n, replication_index)`;
//! replications run on a rayon pool and are aggregated in index order, so
//! the written summaries do not depend on the thread count.

mod diagnostics;
mod report;
mod svg;

use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{estimate_with, Prior};
use crate::intensity::{Baseline, IntensityModel};
use crate::likelihood::LogLikelihood;
use crate::limits::{sample_limit, LimitDraw, LimitKind, LimitSummary};
use crate::rng::derive_seed;
use crate::sampler::sample_observations;
use crate::schedule::{RateSchedule, Regime};
use crate::stats::{ks_critical_one_sample, ks_critical_two_sample, ks_one_sample, ks_two_sample, normal_cdf, Moments};

pub use diagnostics::{
    gaussian_limit_char_fn, CharfnDiagnostics, HalfMomentPoint, HellingerDiagnostics, LanDiagnostics, LanPoint,
};
pub use report::{emit_report, load_config, read_replications, render_from_dir, STATISTICS};

/// Significance level of every KS check.
pub const KS_LEVEL: f64 = 0.001;
const HISTOGRAM_BINS: usize = 40;
const REFERENCE_TAG: u64 = 0x7265_6665_7265_6e63;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Analysis {
    EstimatorDist,
    LanCheck,
    HellingerSuite,
    CharfnCheck,
    LimitMoments,
}

fn default_u_grid() -> Vec<f64> {
    vec![-2.0, -1.0, 1.0, 2.0]
}

fn default_reference_size() -> usize {
    100_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Model template; its `delta` is replaced by `δ_n` from the schedule.
    pub model: IntensityModel,
    pub schedule: RateSchedule,
    pub n_grid: Vec<usize>,
    pub theta_true: f64,
    pub replications: usize,
    #[serde(default)]
    pub prior: Prior,
    pub master_seed: u64,
    pub analyses: Vec<Analysis>,
    pub output_dir: PathBuf,
    /// Points `u` at which `ln Z_n(u)` is recorded for every replication.
    #[serde(default = "default_u_grid")]
    pub u_grid: Vec<f64>,
    /// Size of the simulated limit reference sample (fast regime).
    #[serde(default = "default_reference_size")]
    pub reference_size: usize,
    #[serde(default)]
    pub reference_seed: Option<u64>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        self.schedule.validate(&self.n_grid)?;
        if self.replications < 2 {
            return bad(format!("replications must be at least 2, got {}", self.replications));
        }
        self.model
            .check_theta(self.theta_true)
            .map_err(|e| Error::InvalidConfig(e.to_string()))?;
        self.prior.validate(&self.model)?;
        if self.analyses.contains(&Analysis::EstimatorDist) && self.reference_size < 2 {
            return bad("reference_size must be at least 2".into());
        }
        for &n in &self.n_grid {
            let m = self
                .model_at(n)
                .map_err(|e| Error::InvalidConfig(format!("n = {n}: {e}")))?;
            let phi = self.schedule.phi(n);
            for &u in &self.u_grid {
                let th = self.theta_true + u * phi;
                if !(th > m.alpha() && th < m.beta()) {
                    return bad(format!("u = {u} leaves (alpha, beta) at n = {n}"));
                }
            }
        }
        Ok(())
    }

    pub fn model_at(&self, n: usize) -> Result<IntensityModel> {
        self.model.with_delta(self.schedule.delta(n))
    }

    pub fn seed_for(&self, n: usize) -> u64 {
        derive_seed(self.master_seed, &[n as u64])
    }

    pub fn reference_seed(&self) -> u64 {
        self.reference_seed
            .unwrap_or_else(|| derive_seed(self.master_seed, &[REFERENCE_TAG]))
    }

    fn wants(&self, a: Analysis) -> bool {
        self.analyses.contains(&a)
    }

    /// Constant baseline level, if the baseline is constant.
    fn lambda0(&self) -> Option<f64> {
        match self.model.psi() {
            Baseline::Constant(l) => Some(*l),
            Baseline::PiecewiseLinear(_) => None,
        }
    }

    /// `F = r ln((ψ(θ)+r)/ψ(θ))` at the true location.
    pub fn fisher_f(&self) -> Result<f64> {
        self.model.fisher_f(self.theta_true)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationResult {
    pub n: usize,
    pub replication_index: u64,
    /// Stream seed of this `n`; trajectory `j` uses `(seed, replication_index, j)`.
    pub seed: u64,
    pub mle: f64,
    pub bayes: f64,
    pub norm_err_mle: f64,
    pub norm_err_bayes: f64,
    pub boundary_flag: bool,
    pub loglik_at_mle: f64,
    pub quadrature_error: f64,
    /// `ln Z_n(u)` on the configured u-grid.
    pub log_lr: Vec<f64>,
    /// `Δ_n`, slow regime only.
    pub lan_delta: Option<f64>,
}

pub fn run_replication(config: &ExperimentConfig, n: usize, replication_index: u64) -> Result<ReplicationResult> {
    let model = config.model_at(n)?;
    let seed = config.seed_for(n);
    let phi = config.schedule.phi(n);
    let theta = config.theta_true;
    let sample = sample_observations(&model, theta, n, seed, replication_index)?;
    let ll = LogLikelihood::new(&sample)?;
    let est = estimate_with(&ll, &config.prior)?;
    let log_lr = config
        .u_grid
        .iter()
        .map(|&u| ll.log_lr(theta, u, phi))
        .collect::<Result<Vec<_>>>()?;
    let lan_delta = matches!(config.schedule.regime, Regime::Slow).then(|| ll.lan_central_term(theta, model.delta()));
    let out = ReplicationResult {
        n,
        replication_index,
        seed,
        mle: est.mle,
        bayes: est.bayes,
        norm_err_mle: (est.mle - theta) / phi,
        norm_err_bayes: (est.bayes - theta) / phi,
        boundary_flag: est.boundary_flag,
        loglik_at_mle: est.loglik_at_mle,
        quadrature_error: est.quadrature_error_estimate,
        log_lr,
        lan_delta,
    };
    let finite = [out.mle, out.bayes, out.loglik_at_mle].iter().all(|v| v.is_finite())
        && out.log_lr.iter().all(|v| v.is_finite());
    if !finite {
        return Err(Error::Numeric("non-finite value in replication result".into()));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationFailure {
    pub n: usize,
    pub replication_index: u64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    fn of(xs: &[f64], bins: usize) -> Self {
        let mut v = xs.to_vec();
        v.sort_by(f64::total_cmp);
        let q = |p: f64| v[((v.len() - 1) as f64 * p).round() as usize];
        let (mut lo, mut hi) = (q(0.005), q(0.995));
        if !(hi > lo) {
            lo -= 0.5;
            hi += 0.5;
        }
        let w = (hi - lo) / bins as f64;
        let edges = (0..=bins).map(|i| lo + w * i as f64).collect();
        let mut counts = vec![0; bins];
        for &x in &v {
            if x >= lo && x <= hi {
                counts[(((x - lo) / w) as usize).min(bins - 1)] += 1;
            }
        }
        Self { edges, counts }
    }
}

/// Law the normalized errors are compared with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reference {
    /// `N(0, variance)`.
    Normal { variance: f64 },
    /// Simulated limit sample; `eta` for the MLE and `zeta` for the BE.
    Limit {
        a: f64,
        b: f64,
        size: usize,
        seed: u64,
        eta_second_moment: f64,
        zeta_second_moment: f64,
    },
    /// No limit theory for this regime.
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSummary {
    pub estimator: String,
    /// The regime has no proven limit for this estimator.
    pub exploratory: bool,
    pub moments: Moments,
    pub boundary_rate: f64,
    pub reference_second_moment: Option<f64>,
    pub ks_statistic: Option<f64>,
    pub ks_critical: Option<f64>,
    pub histogram: Histogram,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NReport {
    pub n: usize,
    pub delta_n: f64,
    pub phi_n: f64,
    pub seed: u64,
    pub completed: usize,
    pub failed: usize,
    pub estimators: Vec<EstimatorSummary>,
    pub lan: Option<LanDiagnostics>,
    pub hellinger: Option<HellingerDiagnostics>,
    pub charfn: Option<CharfnDiagnostics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub n: Option<usize>,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub threads: usize,
    pub wall_time_seconds: f64,
    pub reference: Reference,
    pub per_n: Vec<NReport>,
    pub replications: Vec<ReplicationResult>,
    pub failures: Vec<ReplicationFailure>,
    pub checks: Vec<CheckOutcome>,
    pub limit_moments: Option<LimitSummary>,
    pub notes: Vec<String>,
    /// Simulated reference sample of the fast regime, kept for plotting.
    #[serde(skip)]
    pub reference_eta: Vec<f64>,
    #[serde(skip)]
    pub reference_zeta: Vec<f64>,
}

impl ExperimentReport {
    pub fn all_checks_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Reference law of a KS comparison.
pub enum KsReference<'a> {
    Cdf(&'a dyn Fn(f64) -> f64),
    Sample(&'a [f64]),
}

/// One-sample KS against a CDF or two-sample KS against a reference sample.
pub fn ks_distance(sample: &[f64], reference: KsReference<'_>) -> Result<f64> {
    if sample.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "KS needs at least 2 points, got {}",
            sample.len()
        )));
    }
    match reference {
        KsReference::Cdf(f) => ks_one_sample(sample, f),
        KsReference::Sample(r) => ks_two_sample(sample, r),
    }
}

struct ReferenceSample {
    reference: Reference,
    draws: Vec<LimitDraw>,
    eta: Vec<f64>,
    zeta: Vec<f64>,
}

fn build_reference(config: &ExperimentConfig) -> Result<ReferenceSample> {
    let none = ReferenceSample {
        reference: Reference::None,
        draws: Vec::new(),
        eta: Vec::new(),
        zeta: Vec::new(),
    };
    match config.schedule.regime {
        Regime::Slow => Ok(ReferenceSample {
            reference: Reference::Normal {
                variance: 1.0 / config.fisher_f()?,
            },
            ..none
        }),
        Regime::FixedDelta => {
            let info = config
                .model_at(config.n_grid[0])?
                .fisher_information_regular(config.theta_true)?;
            Ok(ReferenceSample {
                reference: Reference::Normal { variance: 1.0 / info },
                ..none
            })
        }
        Regime::Critical(_) => Ok(none),
        Regime::Fast => {
            let lv = config.model.limit_levels(config.theta_true)?;
            if !config.wants(Analysis::EstimatorDist) || lv.a == lv.b {
                return Ok(none);
            }
            let seed = config.reference_seed();
            let draws = sample_limit(LimitKind::TwoSided { a: lv.a, b: lv.b }, config.reference_size, seed)?;
            let eta: Vec<f64> = draws.iter().map(|d| d.eta).collect();
            let zeta: Vec<f64> = draws.iter().map(|d| d.zeta).collect();
            Ok(ReferenceSample {
                reference: Reference::Limit {
                    a: lv.a,
                    b: lv.b,
                    size: draws.len(),
                    seed,
                    eta_second_moment: Moments::of(&eta).second_moment,
                    zeta_second_moment: Moments::of(&zeta).second_moment,
                },
                draws,
                eta,
                zeta,
            })
        }
    }
}

fn summarize_estimator(
    name: &str,
    errors: &[f64],
    boundary_rate: f64,
    reference: &ReferenceSample,
    exploratory: bool,
    with_ks: bool,
) -> Result<EstimatorSummary> {
    let (ref_m2, ks, crit) = match &reference.reference {
        Reference::Normal { variance } => {
            let sd = variance.sqrt();
            let ks = with_ks
                .then(|| ks_one_sample(errors, |x| normal_cdf(x / sd)))
                .transpose()?;
            (
                Some(*variance),
                ks,
                with_ks.then(|| ks_critical_one_sample(errors.len(), KS_LEVEL)),
            )
        }
        Reference::Limit { .. } => {
            let sample = if name == "mle" { &reference.eta } else { &reference.zeta };
            let ks = with_ks.then(|| ks_two_sample(errors, sample)).transpose()?;
            (
                Some(Moments::of(sample).second_moment),
                ks,
                with_ks.then(|| ks_critical_two_sample(errors.len(), sample.len(), KS_LEVEL)),
            )
        }
        Reference::None => (None, None, None),
    };
    Ok(EstimatorSummary {
        estimator: name.to_string(),
        exploratory,
        moments: Moments::of(errors),
        boundary_rate,
        reference_second_moment: ref_m2,
        ks_statistic: ks,
        ks_critical: crit,
        histogram: Histogram::of(errors, HISTOGRAM_BINS),
    })
}

/// Runs every `(n, replication)` task on a pool of `threads` workers and
/// aggregates the results.
pub fn run_experiment(config: &ExperimentConfig, threads: usize) -> Result<ExperimentReport> {
    config.validate()?;
    let started = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    pool.install(|| run_inner(config, threads.max(1), started))
}

fn run_inner(config: &ExperimentConfig, threads: usize, started: Instant) -> Result<ExperimentReport> {
    let mut notes = Vec::new();
    let regime = config.schedule.regime;
    if let Regime::Critical(c) = regime {
        notes.push(format!(
            "critical regime (n*delta_n -> {c}): no theoretical reference; KS tests skipped"
        ));
    }
    let mle_exploratory = matches!(regime, Regime::Fast | Regime::Critical(_));
    if mle_exploratory {
        notes.push("MLE results in this regime are exploratory".into());
    }
    let reference = build_reference(config)?;

    let mut per_n = Vec::new();
    let mut all = Vec::new();
    let mut failures = Vec::new();
    let mut checks = Vec::new();
    for &n in &config.n_grid {
        let outcomes: Vec<Result<ReplicationResult>> = (0..config.replications as u64)
            .into_par_iter()
            .map(|i| run_replication(config, n, i))
            .collect();
        let mut reps = Vec::with_capacity(outcomes.len());
        for (i, o) in outcomes.into_iter().enumerate() {
            match o {
                Ok(r) => reps.push(r),
                Err(e) => failures.push(ReplicationFailure {
                    n,
                    replication_index: i as u64,
                    message: e.to_string(),
                }),
            }
        }
        let failed = config.replications - reps.len();
        if reps.len() < 2 {
            return Err(Error::Numeric(format!(
                "fewer than two replications succeeded at n = {n}"
            )));
        }
        let model = config.model_at(n)?;
        let boundary_rate = reps.iter().filter(|r| r.boundary_flag).count() as f64 / reps.len() as f64;
        let err_mle: Vec<f64> = reps.iter().map(|r| r.norm_err_mle).collect();
        let err_bayes: Vec<f64> = reps.iter().map(|r| r.norm_err_bayes).collect();
        let with_ks = config.wants(Analysis::EstimatorDist);
        let estimators = vec![
            summarize_estimator("mle", &err_mle, boundary_rate, &reference, mle_exploratory, with_ks)?,
            summarize_estimator("bayes", &err_bayes, boundary_rate, &reference, false, with_ks)?,
        ];
        for est in &estimators {
            if let (Some(ks), Some(crit), false) = (est.ks_statistic, est.ks_critical, est.exploratory) {
                checks.push(CheckOutcome {
                    name: format!("ks_{}", est.estimator),
                    n: Some(n),
                    passed: ks < crit,
                    detail: format!("KS {ks:.5} vs critical {crit:.5} at level {KS_LEVEL}"),
                });
            }
        }

        let lan = if config.wants(Analysis::LanCheck) && matches!(regime, Regime::Slow) {
            let d = diagnostics::lan(config, &reps)?;
            checks.extend(d.checks(n));
            Some(d)
        } else {
            None
        };
        let hellinger = if config.wants(Analysis::HellingerSuite) {
            match config.lambda0() {
                Some(l0) if config.model.r() > 0.0 => {
                    let d = diagnostics::hellinger(config, n, l0, &reps)?;
                    checks.extend(d.checks(n));
                    Some(d)
                }
                _ => {
                    notes.push("hellinger suite skipped: needs a constant baseline and r > 0".into());
                    None
                }
            }
        } else {
            None
        };
        let charfn = if config.wants(Analysis::CharfnCheck) {
            Some(diagnostics::charfn(config, n, &reps)?)
        } else {
            None
        };

        per_n.push(NReport {
            n,
            delta_n: model.delta(),
            phi_n: config.schedule.phi(n),
            seed: config.seed_for(n),
            completed: reps.len(),
            failed,
            estimators,
            lan,
            hellinger,
            charfn,
        });
        all.extend(reps);
    }

    if config.wants(Analysis::CharfnCheck) && matches!(regime, Regime::Fast | Regime::Slow) && per_n.len() > 1 {
        let sups: Vec<f64> = per_n
            .iter()
            .filter_map(|p| p.charfn.as_ref().map(|c| c.limit_sup_distance))
            .collect();
        let decreasing = sups.windows(2).all(|w| w[1] < w[0]);
        checks.push(CheckOutcome {
            name: "charfn_limit_distance_decreasing".into(),
            n: None,
            passed: decreasing,
            detail: format!("sup distances along n_grid: {sups:?}"),
        });
    }

    let limit_moments = if config.wants(Analysis::LimitMoments) {
        match (&reference.reference, regime) {
            (Reference::Limit { a, b, seed, .. }, _) => Some(LimitSummary::from_draws(
                LimitKind::TwoSided { a: *a, b: *b },
                *seed,
                &reference.draws,
            )),
            (_, Regime::Fast) => {
                let lv = config.model.limit_levels(config.theta_true)?;
                let seed = config.reference_seed();
                let kind = LimitKind::TwoSided { a: lv.a, b: lv.b };
                let draws = sample_limit(kind, config.reference_size, seed)?;
                Some(LimitSummary::from_draws(kind, seed, &draws))
            }
            _ => None,
        }
    } else {
        None
    };

    Ok(ExperimentReport {
        config: config.clone(),
        threads,
        wall_time_seconds: started.elapsed().as_secs_f64(),
        reference: reference.reference,
        per_n,
        replications: all,
        failures,
        checks,
        limit_moments,
        notes,
        reference_eta: reference.eta,
        reference_zeta: reference.zeta,
    })
}
