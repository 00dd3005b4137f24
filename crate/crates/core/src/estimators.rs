//! Maximum likelihood and Bayesian (posterior mean) estimators of θ.

use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::intensity::IntensityModel;
use crate::likelihood::{Cell, CellKernel, LogLikelihood};
use crate::quadrature::{QuadValue, Simpson};
use crate::sampler::SampleSet;

/// Values closer than this are treated as tied.
const TIE: f64 = 1e-12;
/// Cells whose likelihood bound is this far below the maximum are dropped
/// from the posterior integrals (their mass is bounded and reported).
const LOG_CUTOFF: f64 = 50.0;
const BAYES_REL_TOL: f64 = 1e-8;
const BOUNDARY_EPS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Prior {
    #[default]
    Uniform,
    /// `(θ, q)` knots, linearly interpolated; must cover `[α, β]`.
    Table(Vec<[f64; 2]>),
}

impl Prior {
    pub fn validate(&self, model: &IntensityModel) -> Result<()> {
        let Prior::Table(knots) = self else {
            return Ok(());
        };
        let bad = |m: &str| Err(Error::InvalidConfig(format!("prior table: {m}")));
        if knots.len() < 2 {
            return bad("needs at least two knots");
        }
        if knots
            .iter()
            .any(|k| !(k[1] > 0.0 && k[1].is_finite() && k[0].is_finite()))
        {
            return bad("densities must be finite and strictly positive");
        }
        if knots.windows(2).any(|w| w[1][0] <= w[0][0]) {
            return bad("knot locations must be strictly increasing");
        }
        if knots[0][0] > model.alpha() || knots[knots.len() - 1][0] < model.beta() {
            return bad("knots must cover [alpha, beta]");
        }
        Ok(())
    }

    /// Unnormalized density.
    pub fn density(&self, theta: f64) -> f64 {
        match self {
            Prior::Uniform => 1.0,
            Prior::Table(k) => {
                let i = k.partition_point(|p| p[0] <= theta);
                if i == 0 {
                    k[0][1]
                } else if i == k.len() {
                    k[k.len() - 1][1]
                } else {
                    let ([x0, y0], [x1, y1]) = (k[i - 1], k[i]);
                    y0 + (y1 - y0) * (theta - x0) / (x1 - x0)
                }
            }
        }
    }

    pub fn knots(&self) -> Vec<f64> {
        match self {
            Prior::Uniform => Vec::new(),
            Prior::Table(k) => k.iter().map(|p| p[0]).collect(),
        }
    }

    fn max_density(&self) -> f64 {
        match self {
            Prior::Uniform => 1.0,
            Prior::Table(k) => k.iter().map(|p| p[1]).fold(0.0, f64::max),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    pub mle: f64,
    pub bayes: f64,
    pub loglik_at_mle: f64,
    pub cell_count: usize,
    /// Estimated relative error of the posterior mass integral, including
    /// the bounded mass of pruned cells.
    pub quadrature_error_estimate: f64,
    /// The MLE lies within 1e-6 of α or β.
    pub boundary_flag: bool,
}

/// MLE by sorted branch-and-bound over the likelihood cells.
struct Search<'a> {
    ll: &'a LogLikelihood,
    cells: Vec<Cell>,
    kernels: Vec<Option<CellKernel>>,
}

impl<'a> Search<'a> {
    fn new(ll: &'a LogLikelihood, extra: &[f64]) -> Self {
        let cells = ll.cells(extra);
        let kernels = vec![None; cells.len()];
        Self { ll, cells, kernels }
    }

    fn kernel(&mut self, i: usize) -> &CellKernel {
        let (ll, cell) = (self.ll, &self.cells[i]);
        self.kernels[i].get_or_insert_with(|| ll.kernel(cell))
    }

    fn maximize(&mut self) -> (f64, f64) {
        let mut order: Vec<usize> = (0..self.cells.len()).collect();
        order.sort_unstable_by(|&i, &j| {
            self.cells[j]
                .upper_bound
                .total_cmp(&self.cells[i].upper_bound)
                .then(i.cmp(&j))
        });
        let (mut best_theta, mut best) = (f64::NAN, f64::NEG_INFINITY);
        for i in order {
            if self.cells[i].upper_bound < best - TIE {
                break;
            }
            let (th, v) = self.kernel(i).maximize();
            if v > best + TIE || ((v - best).abs() <= TIE && th < best_theta) {
                best_theta = th;
                best = v;
            }
        }
        (best_theta, best)
    }

    /// Posterior mean with the likelihood shifted by its maximum `peak`.
    /// Returns `(mean, relative error estimate)`.
    fn posterior_mean(&mut self, prior: &Prior, peak: f64, center: f64) -> (f64, f64) {
        let q_max = prior.max_density();
        let mut skipped = 0.0;
        let mut active = Vec::new();
        for (i, c) in self.cells.iter().enumerate() {
            let gap = c.upper_bound - peak;
            if gap < -LOG_CUTOFF {
                skipped += q_max * (c.hi - c.lo) * gap.exp();
            } else {
                active.push(i);
            }
        }
        let width = self.ll.model().beta() - self.ll.model().alpha();
        let integrand = |kern: &CellKernel, shift: f64, th: f64| {
            let w = prior.density(th) * (shift + kern.local(th)).exp();
            Pair(w, w * (th - center) / width)
        };

        let mut rough = 0.0;
        for &i in &active {
            let kern = self.kernel(i);
            let shift = kern.center_value() - peak;
            let (lo, hi) = (kern.lo, kern.hi);
            let h = (hi - lo) / 4.0;
            let f: Vec<f64> = (0..5).map(|j| integrand(kern, shift, lo + j as f64 * h).0).collect();
            rough += h / 3.0 * (f[0] + 4.0 * f[1] + 2.0 * f[2] + 4.0 * f[3] + f[4]);
        }
        let tol = (0.5 * BAYES_REL_TOL * rough / active.len().max(1) as f64).max(f64::MIN_POSITIVE);
        let rule = Simpson {
            abs_tol: tol,
            max_depth: 40,
            min_depth: 1,
        };

        let (mut mass, mut first, mut err) = (0.0, 0.0, 0.0);
        for &i in &active {
            let kern = self.kernel(i);
            let shift = kern.center_value() - peak;
            let res = rule.integrate(&mut |th| integrand(kern, shift, th), kern.lo, kern.hi);
            mass += res.value.0;
            first += res.value.1;
            err += res.error;
        }
        (center + width * first / mass, (err + skipped) / mass)
    }
}

#[derive(Debug, Clone, Copy)]
struct Pair(f64, f64);

impl Add for Pair {
    type Output = Pair;
    fn add(self, o: Pair) -> Pair {
        Pair(self.0 + o.0, self.1 + o.1)
    }
}

impl Sub for Pair {
    type Output = Pair;
    fn sub(self, o: Pair) -> Pair {
        Pair(self.0 - o.0, self.1 - o.1)
    }
}

impl Mul<f64> for Pair {
    type Output = Pair;
    fn mul(self, s: f64) -> Pair {
        Pair(self.0 * s, self.1 * s)
    }
}

impl QuadValue for Pair {
    fn zero() -> Self {
        Pair(0.0, 0.0)
    }
    fn magnitude(&self) -> f64 {
        self.0.abs() + self.1.abs()
    }
}

fn is_boundary(model: &IntensityModel, theta: f64) -> bool {
    (theta - model.alpha()).abs() < BOUNDARY_EPS || (model.beta() - theta).abs() < BOUNDARY_EPS
}

/// Both estimators from a prepared likelihood surface.
pub fn estimate_with(ll: &LogLikelihood, prior: &Prior) -> Result<EstimateResult> {
    prior.validate(ll.model())?;
    let mut search = Search::new(ll, &prior.knots());
    let (mle, peak) = search.maximize();
    let (bayes, rel_err) = search.posterior_mean(prior, peak, mle);
    if !(bayes.is_finite() && mle.is_finite()) {
        return Err(Error::Numeric(
            "estimator evaluation produced a non-finite value".into(),
        ));
    }
    let model = ll.model();
    Ok(EstimateResult {
        mle,
        bayes: bayes.clamp(model.alpha(), model.beta()),
        loglik_at_mle: peak,
        cell_count: search.cells.len(),
        quadrature_error_estimate: rel_err,
        boundary_flag: is_boundary(model, mle),
    })
}

fn surface(sample: &SampleSet, model: &IntensityModel) -> Result<LogLikelihood> {
    LogLikelihood::from_events(model.clone(), sample.n(), sample.pooled_events())
}

pub fn estimate(sample: &SampleSet, model: &IntensityModel, prior: &Prior) -> Result<EstimateResult> {
    estimate_with(&surface(sample, model)?, prior)
}

/// Global maximizer of the log-likelihood over `[α, β]`.
pub fn mle(sample: &SampleSet, model: &IntensityModel) -> Result<f64> {
    let ll = surface(sample, model)?;
    Ok(Search::new(&ll, &[]).maximize().0)
}

/// Posterior mean of θ under `prior`.
pub fn bayes_estimate(sample: &SampleSet, model: &IntensityModel, prior: &Prior) -> Result<f64> {
    Ok(estimate(sample, model, prior)?.bayes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::{sample_observations, Trajectory};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn empty(model: &IntensityModel, n: usize) -> SampleSet {
        SampleSet::from_trajectories(vec![Trajectory::empty(model.tau()); n], model.clone()).unwrap()
    }

    #[test]
    fn empty_sample_goes_to_boundary() {
        let up = IntensityModel::constant(1.0, 2.0, 0.1, 1.0, 0.2, 0.8).unwrap();
        let res = estimate(&empty(&up, 3), &up, &Prior::Uniform).unwrap();
        assert_eq!(res.mle, 0.8);
        assert!(res.boundary_flag);
        assert!(res.bayes > 0.2 && res.bayes < 0.8);
        let down = IntensityModel::constant(1.0, -0.5, 0.1, 1.0, 0.2, 0.8).unwrap();
        let res = estimate(&empty(&down, 3), &down, &Prior::Uniform).unwrap();
        assert_eq!(res.mle, 0.2);
        assert!(res.boundary_flag);
    }

    #[test]
    fn no_jump_gives_prior_mean() {
        let model = IntensityModel::constant(1.0, 0.0, 0.1, 1.0, 0.2, 0.7).unwrap();
        let s = sample_observations(&model, 0.4, 50, 2, 0).unwrap();
        let res = estimate(&s, &model, &Prior::Uniform).unwrap();
        assert!((res.bayes - 0.45).abs() < 1e-12);
        assert_eq!(res.mle, 0.2);
        assert!(res.boundary_flag);
    }

    fn check_grid_dominance(model: &IntensityModel, n: usize, seed: u64) {
        let s = sample_observations(model, 0.5 * (model.alpha() + model.beta()), n, seed, 0).unwrap();
        let ll = LogLikelihood::new(&s).unwrap();
        let res = estimate_with(&ll, &Prior::Uniform).unwrap();
        let at_mle = ll.value(res.mle);
        assert_relative_eq!(at_mle, res.loglik_at_mle, epsilon = 1e-9);
        let (a, b) = (model.alpha(), model.beta());
        for i in 0..=10_000 {
            let th = a + (b - a) * i as f64 / 10_000.0;
            assert!(
                at_mle >= ll.value(th) - 1e-9,
                "grid point {th} beats the MLE {}",
                res.mle
            );
        }
        assert!(res.bayes > a && res.bayes < b);
        assert!(res.quadrature_error_estimate < 1e-6);
    }

    #[test]
    fn grid_dominance() {
        for (delta, r, n) in [
            (0.05, 1.0, 200),
            (0.0, 3.0, 100),
            (0.01, -0.7, 150),
            (0.3, 2.0, 40),
            (1e-5, 1.0, 300),
        ] {
            let model = IntensityModel::constant(1.0, r, delta, 1.0, 0.2, 0.65).unwrap();
            for seed in 0..3 {
                check_grid_dominance(&model, n, seed);
            }
        }
    }

    #[test]
    fn bayes_matches_brute_force() {
        let model = IntensityModel::constant(1.0, 1.5, 0.2, 1.0, 0.2, 0.7).unwrap();
        let s = sample_observations(&model, 0.45, 30, 8, 0).unwrap();
        let ll = LogLikelihood::new(&s).unwrap();
        let prior = Prior::Table(vec![[0.0, 1.0], [0.5, 3.0], [1.0, 0.5]]);
        let res = estimate_with(&ll, &prior).unwrap();
        let m = res.loglik_at_mle;
        let k = 400_000;
        let (mut z, mut f) = (0.0, 0.0);
        for i in 0..k {
            let th = 0.2 + 0.5 * (i as f64 + 0.5) / k as f64;
            let w = prior.density(th) * (ll.value(th) - m).exp();
            z += w;
            f += w * th;
        }
        assert_relative_eq!(res.bayes, f / z, epsilon = 1e-7);
    }

    #[test]
    fn prior_scale_invariance() {
        let model = IntensityModel::constant(2.0, 1.0, 0.02, 1.0, 0.3, 0.7).unwrap();
        let s = sample_observations(&model, 0.5, 500, 3, 0).unwrap();
        let knots = vec![[0.3, 1.0], [0.45, 2.0], [0.7, 0.4]];
        let scaled = knots.iter().map(|k| [k[0], 7.25 * k[1]]).collect();
        let a = bayes_estimate(&s, &model, &Prior::Table(knots)).unwrap();
        let b = bayes_estimate(&s, &model, &Prior::Table(scaled)).unwrap();
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }

    #[test]
    fn invalid_prior_rejected() {
        let model = IntensityModel::constant(2.0, 1.0, 0.02, 1.0, 0.3, 0.7).unwrap();
        let s = sample_observations(&model, 0.5, 5, 3, 0).unwrap();
        for p in [
            Prior::Table(vec![[0.35, 1.0], [0.7, 1.0]]),
            Prior::Table(vec![[0.3, 1.0], [0.7, 0.0]]),
            Prior::Table(vec![[0.7, 1.0], [0.3, 1.0]]),
        ] {
            assert!(matches!(estimate(&s, &model, &p), Err(Error::InvalidConfig(_))));
        }
    }

    #[test]
    fn prior_serde() {
        let u: Prior = serde_json::from_str(r#""uniform""#).unwrap();
        assert_eq!(u, Prior::Uniform);
        let t: Prior = serde_json::from_str(r#"{"table": [[0.0, 1.0], [1.0, 2.0]]}"#).unwrap();
        assert_eq!(t.density(0.25), 1.25);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn shift_equivariance(offset in 0.0f64..2.0, seed in 0u64..1000, delta in prop::sample::select(vec![0.0, 0.01, 0.1])) {
            let model = IntensityModel::constant(1.5, 2.0, delta, 1.0, 0.2, 0.8).unwrap();
            let s = sample_observations(&model, 0.5, 60, seed, 0).unwrap();
            let moved = IntensityModel::constant(1.5, 2.0, delta, 1.0 + offset, 0.2 + offset, 0.8 + offset).unwrap();
            let trajs = s
                .trajectories
                .iter()
                .map(|tr| Trajectory::new(tr.events().iter().map(|t| t + offset).collect(), 1.0 + offset).unwrap())
                .collect();
            let s2 = SampleSet::from_trajectories(trajs, moved.clone()).unwrap();
            let a = estimate(&s, &model, &Prior::Uniform).unwrap();
            let b = estimate(&s2, &moved, &Prior::Uniform).unwrap();
            prop_assert!((b.mle - a.mle - offset).abs() < 1e-9, "{} {}", a.mle, b.mle);
            prop_assert!((b.bayes - a.bayes - offset).abs() < 1e-9);
        }
    }
}
