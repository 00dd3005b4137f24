//! Per-n diagnostics: LAN moments, Hellinger checks and characteristic
//! function distances.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{CheckOutcome, ExperimentConfig, ReplicationResult};
use crate::error::Result;
use crate::likelihood::{
    char_fn_log_lr, hellinger_half_moment, hellinger_increment, increment_bound_fast, increment_bound_slow,
    limit_char_fn, tail_bound_kappa,
};
use crate::schedule::Regime;
use crate::stats::Moments;

const BOUND_SLACK: f64 = 1e-9;
const MC_SIGMAS: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LanPoint {
    pub u: f64,
    pub mean: f64,
    pub mean_se: f64,
    pub target_mean: f64,
    pub variance: f64,
    pub target_variance: f64,
    /// Moments of `ln Z_n(u) - uΔ_n + u²F/2`.
    pub residual_mean: f64,
    pub residual_sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LanDiagnostics {
    pub fisher_f: f64,
    pub delta: Moments,
    pub points: Vec<LanPoint>,
}

impl LanDiagnostics {
    /// LAN moments converge slowly and carry no hard check.
    pub fn checks(&self, _n: usize) -> Vec<CheckOutcome> {
        Vec::new()
    }
}

pub(super) fn lan(config: &ExperimentConfig, reps: &[ReplicationResult]) -> Result<LanDiagnostics> {
    let f = config.fisher_f()?;
    let deltas: Vec<f64> = reps.iter().filter_map(|r| r.lan_delta).collect();
    let points = config
        .u_grid
        .iter()
        .enumerate()
        .map(|(k, &u)| {
            let z: Vec<f64> = reps.iter().map(|r| r.log_lr[k]).collect();
            let res: Vec<f64> = reps
                .iter()
                .map(|r| r.log_lr[k] - u * r.lan_delta.unwrap_or(0.0) + 0.5 * u * u * f)
                .collect();
            let mz = Moments::of(&z);
            let mr = Moments::of(&res);
            LanPoint {
                u,
                mean: mz.mean,
                mean_se: mz.mean_se,
                target_mean: -0.5 * u * u * f,
                variance: mz.variance,
                target_variance: u * u * f,
                residual_mean: mr.mean,
                residual_sd: mr.variance.sqrt(),
            }
        })
        .collect();
    Ok(LanDiagnostics {
        fisher_f: f,
        delta: Moments::of(&deltas),
        points,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalfMomentPoint {
    pub u: f64,
    pub exact: f64,
    pub mc_mean: f64,
    pub mc_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HellingerDiagnostics {
    pub half_moments: Vec<HalfMomentPoint>,
    /// Which increment bound was checked, if any.
    pub increment_bound: Option<String>,
    pub increment_points: usize,
    pub increment_violations: usize,
    pub tail_points: usize,
    pub tail_violations: usize,
}

impl HellingerDiagnostics {
    pub fn checks(&self, n: usize) -> Vec<CheckOutcome> {
        let mut out = Vec::new();
        let worst = self
            .half_moments
            .iter()
            .map(|p| (p.mc_mean - p.exact).abs() / p.mc_se.max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max);
        out.push(CheckOutcome {
            name: "hellinger_half_moment".into(),
            n: Some(n),
            passed: worst <= MC_SIGMAS,
            detail: format!("largest deviation {worst:.2} standard errors"),
        });
        if let Some(kind) = &self.increment_bound {
            out.push(CheckOutcome {
                name: format!("hellinger_increment_{kind}"),
                n: Some(n),
                passed: self.increment_violations == 0,
                detail: format!(
                    "{} of {} grid points violate",
                    self.increment_violations, self.increment_points
                ),
            });
        }
        if self.tail_points > 0 {
            out.push(CheckOutcome {
                name: "hellinger_tail".into(),
                n: Some(n),
                passed: self.tail_violations == 0,
                detail: format!("{} of {} grid points violate", self.tail_violations, self.tail_points),
            });
        }
        out
    }
}

fn in_domain(config: &ExperimentConfig, n: usize, u: f64) -> bool {
    let th = config.theta_true + u * config.schedule.phi(n);
    th > config.model.alpha() && th < config.model.beta()
}

pub(super) fn hellinger(
    config: &ExperimentConfig,
    n: usize,
    lambda0: f64,
    reps: &[ReplicationResult],
) -> Result<HellingerDiagnostics> {
    let (model, theta, sched) = (&config.model, config.theta_true, &config.schedule);
    let r = model.r();
    let mut half_moments = Vec::new();
    for (k, &u) in config.u_grid.iter().enumerate() {
        let z: Vec<f64> = reps.iter().map(|rep| (0.5 * rep.log_lr[k]).exp()).collect();
        let m = Moments::of(&z);
        half_moments.push(HalfMomentPoint {
            u,
            exact: hellinger_half_moment(model, theta, u, sched, n)?,
            mc_mean: m.mean,
            mc_se: m.mean_se,
        });
    }

    let nd = n as f64 * sched.delta(n);
    let kind = match sched.regime {
        Regime::Slow if nd >= 1.0 => Some("slow"),
        Regime::Fast => Some("fast"),
        _ => None,
    };
    let grid: Vec<f64> = (-10..=10)
        .map(|i| 0.5 * i as f64)
        .filter(|&u| in_domain(config, n, u))
        .collect();
    let (mut inc_points, mut inc_bad, mut tail_points, mut tail_bad) = (0, 0, 0, 0);
    if let Some(kind) = kind {
        let kappa = tail_bound_kappa(lambda0, r);
        for &u in &grid {
            let h = hellinger_half_moment(model, theta, u, sched, n)?;
            tail_points += 1;
            if h > (-kappa * u.abs().min(u * u)).exp() + BOUND_SLACK {
                tail_bad += 1;
            }
            for &v in &grid {
                let inc = hellinger_increment(model, theta, u, v, sched, n)?;
                let bound = if kind == "slow" {
                    increment_bound_slow(lambda0, r, u, v)
                } else {
                    increment_bound_fast(r, u, v)
                };
                inc_points += 1;
                if inc > bound + BOUND_SLACK {
                    inc_bad += 1;
                }
            }
        }
    }
    Ok(HellingerDiagnostics {
        half_moments,
        increment_bound: kind.map(String::from),
        increment_points: inc_points,
        increment_violations: inc_bad,
        tail_points,
        tail_violations: tail_bad,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharfnDiagnostics {
    /// `sup |E e^{i(x ln Z_n(u) + y ln Z_n(v))} - limit|` over the fixed grid;
    /// NaN when the regime has no limit.
    pub limit_sup_distance: f64,
    pub limit_grid_points: usize,
    /// Empirical characteristic function against the exact one on u-grid pairs.
    pub mc_sup_distance: f64,
    pub mc_grid_points: usize,
}

pub const CHARFN_U: [f64; 5] = [0.5, 1.0, 1.5, 2.0, 2.5];
pub const CHARFN_X: [f64; 4] = [-1.0, -0.5, 0.5, 1.0];

/// Characteristic function of `(uΔ - u²F/2, vΔ - v²F/2)`, `Δ ~ N(0, F)`.
pub fn gaussian_limit_char_fn(f: f64, u: f64, v: f64, x: f64, y: f64) -> Complex64 {
    let s = u * x + v * y;
    Complex64::new(-0.5 * f * s * s, -0.5 * f * (u * u * x + v * v * y)).exp()
}

type PairCharFn = Box<dyn Fn(f64, f64, f64, f64) -> Complex64>;

pub(super) fn charfn(config: &ExperimentConfig, n: usize, reps: &[ReplicationResult]) -> Result<CharfnDiagnostics> {
    let (model, theta, sched) = (&config.model, config.theta_true, &config.schedule);
    let limit: Option<PairCharFn> = match sched.regime {
        Regime::Slow => {
            let f = config.fisher_f()?;
            Some(Box::new(move |u, v, x, y| gaussian_limit_char_fn(f, u, v, x, y)))
        }
        Regime::Fast => {
            let lv = model.limit_levels(theta)?;
            Some(Box::new(move |u, v, x, y| limit_char_fn(lv.a, lv.b, u, v, x, y)))
        }
        _ => None,
    };
    let (mut limit_sup, mut limit_points) = (f64::NAN, 0);
    if let Some(limit) = limit {
        limit_sup = 0.0;
        for (i, &u) in CHARFN_U.iter().enumerate() {
            for &v in &CHARFN_U[i + 1..] {
                if !in_domain(config, n, u) || !in_domain(config, n, v) {
                    continue;
                }
                for &x in &CHARFN_X {
                    for &y in &CHARFN_X {
                        let d = (char_fn_log_lr(model, theta, sched, n, u, v, x, y)? - limit(u, v, x, y)).norm();
                        limit_sup = f64::max(limit_sup, d);
                        limit_points += 1;
                    }
                }
            }
        }
    }

    let (mut mc_sup, mut mc_points) = (0.0f64, 0);
    let m = reps.len() as f64;
    for i in 0..config.u_grid.len() {
        for j in i + 1..config.u_grid.len() {
            let (u, v) = (config.u_grid[i], config.u_grid[j]);
            for &x in &CHARFN_X {
                for &y in &CHARFN_X {
                    let emp: Complex64 = reps
                        .iter()
                        .map(|r| Complex64::new(0.0, x * r.log_lr[i] + y * r.log_lr[j]).exp())
                        .sum::<Complex64>()
                        / m;
                    let exact = char_fn_log_lr(model, theta, sched, n, u, v, x, y)?;
                    mc_sup = mc_sup.max((emp - exact).norm());
                    mc_points += 1;
                }
            }
        }
    }
    Ok(CharfnDiagnostics {
        limit_sup_distance: limit_sup,
        limit_grid_points: limit_points,
        mc_sup_distance: mc_sup,
        mc_grid_points: mc_points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_char_fn_one_point() {
        // v-term switched off: E e^{ix(uΔ - u²F/2)} = e^{-ixu²F/2 - x²u²F/2}
        let (f, u, x) = (0.7, 1.3, -0.4);
        let got = gaussian_limit_char_fn(f, u, 2.0, x, 0.0);
        let want = Complex64::new(-0.5 * x * x * u * u * f, -0.5 * x * u * u * f).exp();
        assert!((got - want).norm() < 1e-15);
    }
}
