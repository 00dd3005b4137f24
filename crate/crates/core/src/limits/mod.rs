//! Limit likelihood-ratio processes and the laws of the normalized
//! estimator errors.
//!
//! In the fast regime the limit is
//!
//! ```text
//! ln Z★(u) = ln(a/b)·Y⁺(u) + (b-a)u,     u ≥ 0,
//! ln Z★(u) = ln(b/a)·Y⁻(-u) + (b-a)u,    u ≤ 0,
//! ```
//!
//! with independent Poisson processes `Y⁺` (rate b) and `Y⁻` (rate a).
//! Its argsup `η` and posterior mean `ζ = ∫uZ★/∫Z★` are the limits of the
//! normalized MLE and Bayes errors. The one-parameter version in
//! `ρ = |ln(a/b)|` satisfies `η_{a,b} = η_ρ/(a-b)`, `ζ_{a,b} = ζ_ρ/(a-b)`.

mod segments;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream_from_path, StreamRng};
use crate::sampler::extend_homogeneous;
use crate::stats::Moments;

use segments::{Candidate, SideSpec, SideState};

/// Relative tolerance on ζ between successive windows.
const ZETA_REL_TOL: f64 = 1e-8;
const WINDOW_GROWTH: f64 = 1.5;
const MAX_GROWTHS: usize = 24;

/// One draw of `ξ_F / F ~ N(0, 1/F)`, the slow-regime limit of the
/// normalized estimators.
pub fn sample_gaussian_limit<R: Rng + ?Sized>(fisher: f64, rng: &mut R) -> Result<f64> {
    if !(fisher > 0.0 && fisher.is_finite()) {
        return Err(Error::InvalidInput(format!("F must be positive, got {fisher}")));
    }
    let z: f64 = rng.sample(StandardNormal);
    Ok(z / fisher.sqrt())
}

/// Which limit process to simulate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitKind {
    TwoSided { a: f64, b: f64 },
    Rho { rho: f64 },
}

impl LimitKind {
    pub fn validate(&self) -> Result<()> {
        match *self {
            LimitKind::TwoSided { a, b } => {
                if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) || a == b {
                    return Err(Error::InvalidInput(format!(
                        "need a, b > 0 and a != b, got a={a}, b={b}"
                    )));
                }
            }
            LimitKind::Rho { rho } => {
                if !(rho > 0.0 && rho.is_finite()) {
                    return Err(Error::InvalidInput(format!("rho must be positive, got {rho}")));
                }
            }
        }
        Ok(())
    }

    /// `(u ≥ 0 side, u ≤ 0 side)`.
    fn sides(&self) -> (SideSpec, SideSpec) {
        match *self {
            LimitKind::TwoSided { a, b } => (
                SideSpec {
                    rate: b,
                    jump: (a / b).ln(),
                    drift: b - a,
                },
                SideSpec {
                    rate: a,
                    jump: (b / a).ln(),
                    drift: a - b,
                },
            ),
            LimitKind::Rho { rho } => (
                SideSpec {
                    rate: 1.0 / rho.exp_m1(),
                    jump: rho,
                    drift: -1.0,
                },
                SideSpec {
                    rate: -1.0 / (-rho).exp_m1(),
                    jump: -rho,
                    drift: 1.0,
                },
            ),
        }
    }

    /// `50/(|b-a| ∧ 1)`, enlarged when the mean drift of a side is so weak
    /// that the log-process needs longer to fall well below its maximum.
    pub fn initial_window(&self) -> f64 {
        let (p, m) = self.sides();
        let slope = p.drift.abs().min(1.0);
        let mean = p.mean_drift().abs().min(m.mean_drift().abs());
        (50.0 / slope).max(30.0 / mean)
    }

    /// Natural scale of `u`, used as the absolute floor of the ζ tolerance.
    fn unit(&self) -> f64 {
        1.0 / self.sides().0.drift.abs()
    }
}

/// Argsup of a path: location, log of the sup (a one-sided limit at a
/// jump), and whether it sits on the window edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Argsup {
    pub location: f64,
    pub log_value: f64,
    pub truncated: bool,
}

fn check_jumps(jumps: &[f64], window: f64) -> Result<()> {
    if jumps.windows(2).any(|w| w[1] <= w[0]) || jumps.iter().any(|&t| !(t > 0.0 && t <= window)) {
        return Err(Error::InvalidInput(
            "jump times must be strictly increasing within (0, U]".into(),
        ));
    }
    Ok(())
}

/// Fixed-window functionals shared by both parametrizations.
#[derive(Debug, Clone)]
struct Profile {
    plus: SideState,
    minus: SideState,
    window: f64,
}

impl Profile {
    fn new(kind: LimitKind, window: f64, plus: &[f64], minus: &[f64]) -> Self {
        let (p, m) = kind.sides();
        let mut plus_state = SideState::new(p, true);
        plus_state.jumps = plus.to_vec();
        plus_state.simulated_to = window;
        plus_state.absorb();
        let mut minus_state = SideState::new(m, false);
        minus_state.jumps = minus.to_vec();
        minus_state.simulated_to = window;
        minus_state.absorb();
        Self {
            plus: plus_state,
            minus: minus_state,
            window,
        }
    }

    fn log_value(&self, u: f64) -> Result<f64> {
        if !(u.abs() <= self.window) {
            return Err(Error::domain("u", u, -self.window, self.window));
        }
        let (side, w) = if u >= 0.0 { (&self.plus, u) } else { (&self.minus, -u) };
        let count = side.jumps.partition_point(|&t| t <= w);
        Ok(side.spec.jump * count as f64 + side.spec.drift * w)
    }

    /// Limits of the log-process from the left and from the right in `u`.
    fn one_sided(&self, u: f64) -> Result<(f64, f64)> {
        let v = self.log_value(u)?;
        let (side, w) = if u >= 0.0 { (&self.plus, u) } else { (&self.minus, -u) };
        let below = side.jumps.partition_point(|&t| t < w);
        let other = side.spec.jump * below as f64 + side.spec.drift * w;
        Ok(if u >= 0.0 { (other, v) } else { (v, other) })
    }

    fn evaluate(&self) -> (f64, Argsup) {
        evaluate_states(&self.plus, &self.minus, self.window)
    }
}

fn evaluate_states(plus: &SideState, minus: &SideState, window: f64) -> (f64, Argsup) {
    let (ap, cp) = plus.query(window);
    let (am, cm) = minus.query(window);
    let zeta = ap.merged(&am).ratio();
    let best = Candidate::best(cp, cm);
    let argsup = Argsup {
        location: best.u,
        log_value: best.log_value,
        truncated: best.u.abs() >= window,
    };
    (zeta, argsup)
}

/// A realization of `(Y⁺, Y⁻)` on `[0, U]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoSidedPoissonPath {
    pub a: f64,
    pub b: f64,
    pub window: f64,
    pub plus_jumps: Vec<f64>,
    pub minus_jumps: Vec<f64>,
}

impl TwoSidedPoissonPath {
    pub fn new(a: f64, b: f64, window: f64, plus_jumps: Vec<f64>, minus_jumps: Vec<f64>) -> Result<Self> {
        LimitKind::TwoSided { a, b }.validate()?;
        if !(window > 0.0 && window.is_finite()) {
            return Err(Error::InvalidInput(format!("window must be positive, got {window}")));
        }
        check_jumps(&plus_jumps, window)?;
        check_jumps(&minus_jumps, window)?;
        Ok(Self {
            a,
            b,
            window,
            plus_jumps,
            minus_jumps,
        })
    }

    pub fn sample<R: Rng + ?Sized>(a: f64, b: f64, window: f64, rng: &mut R) -> Result<Self> {
        LimitKind::TwoSided { a, b }.validate()?;
        let mut plus = Vec::new();
        extend_homogeneous(&mut plus, 0.0, b, window, rng);
        let mut minus = Vec::new();
        extend_homogeneous(&mut minus, 0.0, a, window, rng);
        Self::new(a, b, window, plus, minus)
    }

    fn profile(&self) -> Profile {
        Profile::new(
            LimitKind::TwoSided { a: self.a, b: self.b },
            self.window,
            &self.plus_jumps,
            &self.minus_jumps,
        )
    }

    /// `ln Z★_{a,b}(u)` for `|u| ≤ U`.
    pub fn log_value(&self, u: f64) -> Result<f64> {
        self.profile().log_value(u)
    }

    /// `(left limit, right limit)` of `ln Z★` at `u`.
    pub fn one_sided_limits(&self, u: f64) -> Result<(f64, f64)> {
        self.profile().one_sided(u)
    }

    /// `η_{a,b}` on the window.
    pub fn argsup(&self) -> Argsup {
        self.profile().evaluate().1
    }

    /// `ζ_{a,b}` on the window.
    pub fn bayes_functional(&self) -> f64 {
        self.profile().evaluate().0
    }

    /// The path of `Z★_{b,a}(-u)`: sides and rates exchanged.
    pub fn mirrored(&self) -> Self {
        Self {
            a: self.b,
            b: self.a,
            window: self.window,
            plus_jumps: self.minus_jumps.clone(),
            minus_jumps: self.plus_jumps.clone(),
        }
    }
}

/// `eval_zstar_log(path, u)`.
pub fn eval_zstar_log(path: &TwoSidedPoissonPath, u: f64) -> Result<f64> {
    path.log_value(u)
}

/// A realization of `(Π⁺, Π⁻)` for the ρ-parametrized process
/// `ln Z★_ρ(x) = ρΠ⁺(x) - x` (x ≥ 0), `-ρΠ⁻(-x) - x` (x ≤ 0).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhoPath {
    pub rho: f64,
    pub window: f64,
    pub plus_jumps: Vec<f64>,
    pub minus_jumps: Vec<f64>,
}

impl RhoPath {
    pub fn new(rho: f64, window: f64, plus_jumps: Vec<f64>, minus_jumps: Vec<f64>) -> Result<Self> {
        LimitKind::Rho { rho }.validate()?;
        if !(window > 0.0 && window.is_finite()) {
            return Err(Error::InvalidInput(format!("window must be positive, got {window}")));
        }
        check_jumps(&plus_jumps, window)?;
        check_jumps(&minus_jumps, window)?;
        Ok(Self {
            rho,
            window,
            plus_jumps,
            minus_jumps,
        })
    }

    pub fn sample<R: Rng + ?Sized>(rho: f64, window: f64, rng: &mut R) -> Result<Self> {
        let kind = LimitKind::Rho { rho };
        kind.validate()?;
        let (p, m) = kind.sides();
        let mut plus = Vec::new();
        extend_homogeneous(&mut plus, 0.0, p.rate, window, rng);
        let mut minus = Vec::new();
        extend_homogeneous(&mut minus, 0.0, m.rate, window, rng);
        Self::new(rho, window, plus, minus)
    }

    fn profile(&self) -> Profile {
        Profile::new(
            LimitKind::Rho { rho: self.rho },
            self.window,
            &self.plus_jumps,
            &self.minus_jumps,
        )
    }

    pub fn log_value(&self, x: f64) -> Result<f64> {
        self.profile().log_value(x)
    }

    pub fn argsup(&self) -> Argsup {
        self.profile().evaluate().1
    }

    pub fn bayes_functional(&self) -> f64 {
        self.profile().evaluate().0
    }
}

/// `η` and `ζ` of one path simulated on an adaptively grown window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitDraw {
    pub eta: f64,
    pub zeta: f64,
    pub window: f64,
    /// The window rule hit its growth cap, or η sits on the window edge.
    pub truncated: bool,
}

struct AdaptivePath {
    plus: SideState,
    minus: SideState,
    rng_plus: StreamRng,
    rng_minus: StreamRng,
}

impl AdaptivePath {
    fn extend(&mut self, window: f64) {
        for (side, rng) in [
            (&mut self.plus, &mut self.rng_plus),
            (&mut self.minus, &mut self.rng_minus),
        ] {
            if window > side.simulated_to {
                let rate = side.spec.rate;
                side.simulated_to = extend_homogeneous(&mut side.jumps, side.simulated_to, rate, window, rng);
                side.absorb();
            }
        }
    }
}

/// Simulates path `index` of the stream family keyed by `seed`, enlarging
/// the window by 50% until ζ moves by less than 1e-8 (relative) and η is
/// unchanged. The values reported are those at the accepted window.
pub fn draw_limit(kind: LimitKind, seed: u64, index: u64) -> Result<LimitDraw> {
    kind.validate()?;
    let (p, m) = kind.sides();
    let mut path = AdaptivePath {
        plus: SideState::new(p, true),
        minus: SideState::new(m, false),
        rng_plus: stream_from_path(seed, &[index, 0]),
        rng_minus: stream_from_path(seed, &[index, 1]),
    };
    let unit = kind.unit();
    let mut window = kind.initial_window();
    path.extend(window);
    let (mut zeta, mut arg) = evaluate_states(&path.plus, &path.minus, window);
    for _ in 0..MAX_GROWTHS {
        let next = window * WINDOW_GROWTH;
        path.extend(next);
        let (z2, a2) = evaluate_states(&path.plus, &path.minus, next);
        let stable_zeta = (z2 - zeta).abs() <= ZETA_REL_TOL * z2.abs().max(unit);
        let stable_eta = a2.location == arg.location && !arg.truncated;
        if stable_zeta && stable_eta {
            return Ok(LimitDraw {
                eta: arg.location,
                zeta,
                window,
                truncated: false,
            });
        }
        window = next;
        zeta = z2;
        arg = a2;
    }
    Ok(LimitDraw {
        eta: arg.location,
        zeta,
        window,
        truncated: true,
    })
}

/// `m` independent draws, path `i` keyed by `(seed, i)`; order and values
/// do not depend on the thread count.
pub fn sample_limit(kind: LimitKind, m: usize, seed: u64) -> Result<Vec<LimitDraw>> {
    kind.validate()?;
    (0..m as u64)
        .into_par_iter()
        .map(|i| draw_limit(kind, seed, i))
        .collect()
}

/// `m` draws of `ζ_{a,b}`, the reference law of `n(θ̃_n - θ)` in the fast regime.
pub fn reference_sample_zeta(a: f64, b: f64, m: usize, seed: u64) -> Result<Vec<f64>> {
    Ok(sample_limit(LimitKind::TwoSided { a, b }, m, seed)?
        .into_iter()
        .map(|d| d.zeta)
        .collect())
}

/// Monte Carlo moments of η and ζ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitSummary {
    pub kind: LimitKind,
    pub paths: usize,
    pub seed: u64,
    pub eta: Moments,
    pub zeta: Moments,
    pub truncated: usize,
}

impl LimitSummary {
    pub fn from_draws(kind: LimitKind, seed: u64, draws: &[LimitDraw]) -> Self {
        let eta: Vec<f64> = draws.iter().map(|d| d.eta).collect();
        let zeta: Vec<f64> = draws.iter().map(|d| d.zeta).collect();
        Self {
            kind,
            paths: draws.len(),
            seed,
            eta: Moments::of(&eta),
            zeta: Moments::of(&zeta),
            truncated: draws.iter().filter(|d| d.truncated).count(),
        }
    }
}
