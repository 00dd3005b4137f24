//! The smooth change-point intensity family.
//!
//! `λ_θ(t) = ψ(t) + (r/δ)(t-θ)·1[θ ≤ t < θ+δ] + r·1[t ≥ θ+δ]`, with `δ = 0`
//! giving the step (change-point) intensity and a fixed `δ > 0` the regular one.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{breakpoint_grid, Simpson};

/// Known, strictly positive baseline intensity ψ on `[0, τ]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Baseline {
    #[serde(rename = "constant")]
    Constant(f64),
    /// Knots `(time, rate)` interpolated linearly; first knot at 0, last at τ.
    #[serde(rename = "piecewise")]
    PiecewiseLinear(Vec<[f64; 2]>),
}

impl Baseline {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Baseline::Constant(l) => *l,
            Baseline::PiecewiseLinear(knots) => {
                let k = knots.partition_point(|p| p[0] <= t);
                if k == 0 {
                    return knots[0][1];
                }
                if k >= knots.len() {
                    return knots[knots.len() - 1][1];
                }
                let [t0, y0] = knots[k - 1];
                let [t1, y1] = knots[k];
                y0 + (y1 - y0) * (t - t0) / (t1 - t0)
            }
        }
    }

    /// `∫₀ᵗ ψ(s) ds`, exact per linear piece.
    pub fn integral(&self, t: f64) -> f64 {
        match self {
            Baseline::Constant(l) => l * t,
            Baseline::PiecewiseLinear(knots) => {
                let mut acc = 0.0;
                for w in knots.windows(2) {
                    let [t0, y0] = w[0];
                    let [t1, _] = w[1];
                    if t <= t0 {
                        break;
                    }
                    let end = t.min(t1);
                    let y_end = self.eval(end);
                    acc += 0.5 * (y0 + y_end) * (end - t0);
                }
                acc
            }
        }
    }

    pub fn min(&self) -> f64 {
        match self {
            Baseline::Constant(l) => *l,
            Baseline::PiecewiseLinear(k) => k.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min),
        }
    }

    pub fn max(&self) -> f64 {
        match self {
            Baseline::Constant(l) => *l,
            Baseline::PiecewiseLinear(k) => k.iter().map(|p| p[1]).fold(f64::NEG_INFINITY, f64::max),
        }
    }

    /// Knot times (where ψ may have a kink).
    pub fn knots(&self) -> Vec<f64> {
        match self {
            Baseline::Constant(_) => Vec::new(),
            Baseline::PiecewiseLinear(k) => k.iter().map(|p| p[0]).collect(),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Baseline::Constant(_))
    }

    fn validate(&self, tau: f64) -> Result<()> {
        match self {
            Baseline::Constant(l) => {
                if !(l.is_finite() && *l > 0.0) {
                    return Err(Error::InvalidModel(format!("constant baseline must be > 0, got {l}")));
                }
            }
            Baseline::PiecewiseLinear(knots) => {
                if knots.len() < 2 {
                    return Err(Error::InvalidModel(
                        "piecewise baseline needs at least two knots".into(),
                    ));
                }
                if knots
                    .iter()
                    .any(|p| !p[0].is_finite() || !p[1].is_finite() || p[1] <= 0.0)
                {
                    return Err(Error::InvalidModel(
                        "piecewise baseline values must be finite and > 0".into(),
                    ));
                }
                if knots.windows(2).any(|w| w[1][0] <= w[0][0]) {
                    return Err(Error::InvalidModel("baseline knots must be strictly increasing".into()));
                }
                if knots[0][0] != 0.0 || knots[knots.len() - 1][0] != tau {
                    return Err(Error::InvalidModel(format!(
                        "baseline knots must span [0, {tau}], got [{}, {}]",
                        knots[0][0],
                        knots[knots.len() - 1][0]
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ModelSpec {
    psi: Baseline,
    r: f64,
    delta: f64,
    tau: f64,
    alpha: f64,
    beta: f64,
}

/// Parametric intensity family on `[0, τ]` with unknown location θ ∈ (α, β).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelSpec", into = "ModelSpec")]
pub struct IntensityModel {
    psi: Baseline,
    r: f64,
    delta: f64,
    tau: f64,
    alpha: f64,
    beta: f64,
}

impl TryFrom<ModelSpec> for IntensityModel {
    type Error = Error;

    fn try_from(s: ModelSpec) -> Result<Self> {
        IntensityModel::new(s.psi, s.r, s.delta, s.tau, s.alpha, s.beta)
    }
}

impl From<IntensityModel> for ModelSpec {
    fn from(m: IntensityModel) -> Self {
        ModelSpec {
            psi: m.psi,
            r: m.r,
            delta: m.delta,
            tau: m.tau,
            alpha: m.alpha,
            beta: m.beta,
        }
    }
}

/// Rates `(a, b) = (ψ(θ), ψ(θ) + r)` on either side of the limiting jump.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitLevels {
    pub a: f64,
    pub b: f64,
}

impl IntensityModel {
    pub fn new(psi: Baseline, r: f64, delta: f64, tau: f64, alpha: f64, beta: f64) -> Result<Self> {
        for (name, v) in [
            ("r", r),
            ("delta", delta),
            ("tau", tau),
            ("alpha", alpha),
            ("beta", beta),
        ] {
            if !v.is_finite() {
                return Err(Error::InvalidModel(format!("{name} must be finite, got {v}")));
            }
        }
        if !(0.0 < alpha && alpha < beta && beta < tau) {
            return Err(Error::InvalidModel(format!(
                "need 0 < alpha < beta < tau, got alpha={alpha}, beta={beta}, tau={tau}"
            )));
        }
        if delta < 0.0 {
            return Err(Error::InvalidModel(format!("delta must be >= 0, got {delta}")));
        }
        if beta + delta > tau {
            return Err(Error::InvalidModel(format!(
                "ramp does not fit: beta + delta = {} > tau = {tau}",
                beta + delta
            )));
        }
        psi.validate(tau)?;
        if r <= -psi.min() {
            return Err(Error::InvalidModel(format!(
                "r = {r} must exceed -min psi = {}",
                -psi.min()
            )));
        }
        Ok(Self {
            psi,
            r,
            delta,
            tau,
            alpha,
            beta,
        })
    }

    /// Convenience constructor for `ψ ≡ λ₀`.
    pub fn constant(lambda0: f64, r: f64, delta: f64, tau: f64, alpha: f64, beta: f64) -> Result<Self> {
        Self::new(Baseline::Constant(lambda0), r, delta, tau, alpha, beta)
    }

    /// Same family with another transition width.
    pub fn with_delta(&self, delta: f64) -> Result<Self> {
        Self::new(self.psi.clone(), self.r, delta, self.tau, self.alpha, self.beta)
    }

    pub fn psi(&self) -> &Baseline {
        &self.psi
    }
    pub fn r(&self) -> f64 {
        self.r
    }
    pub fn delta(&self) -> f64 {
        self.delta
    }
    pub fn tau(&self) -> f64 {
        self.tau
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Lower bound `min(m, m + r)` of every intensity in the family.
    pub fn min_rate(&self) -> f64 {
        let m = self.psi.min();
        m.min(m + self.r)
    }

    /// Thinning envelope `max ψ + max(r, 0)`.
    pub fn envelope_rate(&self) -> f64 {
        self.psi.max() + self.r.max(0.0)
    }

    pub fn check_theta(&self, theta: f64) -> Result<()> {
        if theta > self.alpha && theta < self.beta {
            Ok(())
        } else {
            Err(Error::open_domain("theta", theta, self.alpha, self.beta))
        }
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if (0.0..=self.tau).contains(&t) {
            Ok(())
        } else {
            Err(Error::domain("t", t, 0.0, self.tau))
        }
    }

    /// Ramp contribution `λ_θ(t) - ψ(t)`.
    #[inline]
    pub fn ramp(&self, theta: f64, t: f64) -> f64 {
        if t < theta {
            0.0
        } else if t < theta + self.delta {
            self.r * (t - theta) / self.delta
        } else {
            self.r
        }
    }

    /// `∫₀ᵗ (λ_θ - ψ)`.
    #[inline]
    pub fn ramp_integral(&self, theta: f64, t: f64) -> f64 {
        if t <= theta {
            0.0
        } else if t < theta + self.delta {
            let s = t - theta;
            0.5 * self.r * s * s / self.delta
        } else {
            self.r * (t - theta) - 0.5 * self.r * self.delta
        }
    }

    /// `λ_θ(t)` without domain checks; callers guarantee θ ∈ [α, β], t ∈ [0, τ].
    #[inline]
    pub fn rate(&self, theta: f64, t: f64) -> f64 {
        self.psi.eval(t) + self.ramp(theta, t)
    }

    pub fn eval_intensity(&self, theta: f64, t: f64) -> Result<f64> {
        self.check_theta(theta)?;
        self.check_time(t)?;
        Ok(self.rate(theta, t))
    }

    pub fn cumulative_intensity(&self, theta: f64, t: f64) -> Result<f64> {
        self.check_theta(theta)?;
        self.check_time(t)?;
        Ok(self.cumulative_unchecked(theta, t))
    }

    #[inline]
    pub fn cumulative_unchecked(&self, theta: f64, t: f64) -> f64 {
        self.psi.integral(t) + self.ramp_integral(theta, t)
    }

    /// Expected count over the whole window, `Λ_θ(τ)`.
    pub fn total_mass(&self, theta: f64) -> f64 {
        self.cumulative_unchecked(theta, self.tau)
    }

    /// Fisher-type constant `F = r ln((ψ(θ)+r)/ψ(θ))` of the shrinking-ramp regimes.
    pub fn fisher_f(&self, theta: f64) -> Result<f64> {
        self.check_theta(theta)?;
        let a = self.psi.eval(theta);
        Ok(self.r * (self.r / a).ln_1p())
    }

    /// Fisher information `∫ λ̇²/λ` of the fixed-δ (regular) model, by quadrature.
    pub fn fisher_information_regular(&self, theta: f64) -> Result<f64> {
        if self.delta <= 0.0 {
            return Err(Error::InvalidInput("regular Fisher information needs delta > 0".into()));
        }
        self.check_theta(theta)?;
        if self.r == 0.0 {
            return Ok(0.0);
        }
        let slope = self.r / self.delta;
        let lo = theta;
        let hi = theta + self.delta;
        let pts = breakpoint_grid(lo, hi, self.psi.knots());
        let mut f = |t: f64| slope * slope / self.rate(theta, t);
        Ok(Simpson::default().integrate_pieces(&mut f, &pts).value)
    }

    pub fn limit_levels(&self, theta: f64) -> Result<LimitLevels> {
        self.check_theta(theta)?;
        let a = self.psi.eval(theta);
        Ok(LimitLevels { a, b: a + self.r })
    }

    /// Breakpoints on `[0, τ]` for integrands built from `λ_{θ_k}`: baseline
    /// knots plus `θ_k` and `θ_k + δ` for every location.
    pub fn breakpoints(&self, thetas: &[f64]) -> Vec<f64> {
        let cand = thetas
            .iter()
            .flat_map(|&th| [th, th + self.delta])
            .chain(self.psi.knots());
        breakpoint_grid(0.0, self.tau, cand)
    }
}
