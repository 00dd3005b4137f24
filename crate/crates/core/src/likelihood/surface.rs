//! The log-likelihood as a function of θ for a fixed pooled sample.
//!
//! With all `N` event times of the `n` trajectories pooled and sorted,
//!
//! ```text
//! ℓ(θ) = Σ_{t_i < θ} ln ψ(t_i) + Σ_{θ ≤ t_i < θ+δ} ln(ψ(t_i) + r(t_i-θ)/δ)
//!      + Σ_{t_i ≥ θ+δ} ln(ψ(t_i) + r) - n(Ψ(τ) + r(τ-θ) - rδ/2 - τ).
//! ```
//!
//! Between consecutive points of `{t_i} ∪ {t_i - δ}` the three index sets
//! are fixed, so ℓ is a constant plus a sum of logs of affine functions plus
//! a linear term: concave and smooth on each such cell.

use crate::error::{Error, Result};
use crate::intensity::IntensityModel;
use crate::optimize::golden_section_max;
use crate::sampler::SampleSet;

const SERIES_TERMS: usize = 12;
/// Largest `|r/δ|·halfwidth / min ramp value` for which the series is used.
const SERIES_RADIUS: f64 = 0.05;

/// A θ-interval on which the partition of events into before/ramp/after is constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub lo: f64,
    pub hi: f64,
    before: usize,
    ramp_end: usize,
    /// Cheap bound `sup_{[lo,hi]} ℓ ≤ upper_bound`.
    pub upper_bound: f64,
}

impl Cell {
    /// Number of events on the ramp for θ inside the cell.
    pub fn ramp_len(&self) -> usize {
        self.ramp_end - self.before
    }
}

#[derive(Debug, Clone)]
pub struct LogLikelihood {
    model: IntensityModel,
    n: usize,
    times: Vec<f64>,
    shifted: Vec<f64>,
    psi_at: Vec<f64>,
    cum_lo: Vec<f64>,
    cum_hi: Vec<f64>,
    offset: f64,
    slope: f64,
}

fn compensated_prefix(vals: impl Iterator<Item = f64>, len: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(len + 1);
    let (mut sum, mut c) = (0.0f64, 0.0f64);
    out.push(0.0);
    for v in vals {
        let y = v - c;
        let t = sum + y;
        c = (t - sum) - y;
        sum = t;
        out.push(sum);
    }
    out
}

impl LogLikelihood {
    pub fn new(sample: &SampleSet) -> Result<Self> {
        Self::from_events(sample.model.clone(), sample.n(), sample.pooled_events())
    }

    /// Builds the surface from pooled event times of `n` trajectories.
    pub fn from_events(model: IntensityModel, n: usize, mut times: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("n must be at least 1".into()));
        }
        if times.iter().any(|t| !(0.0..=model.tau()).contains(t)) {
            return Err(Error::InvalidInput("event time outside [0, tau]".into()));
        }
        times.sort_unstable_by(f64::total_cmp);
        let r = model.r();
        let delta = model.delta();
        let psi_at: Vec<f64> = times.iter().map(|&t| model.psi().eval(t)).collect();
        if let Some(&bad) = psi_at.iter().find(|&&p| !(p > 0.0 && p + r > 0.0)) {
            return Err(Error::Numeric(format!(
                "non-positive intensity level {bad} at an event"
            )));
        }
        let shifted = times.iter().map(|&t| t - delta).collect();
        let cum_lo = compensated_prefix(psi_at.iter().map(|p| p.ln()), times.len());
        let cum_hi = compensated_prefix(psi_at.iter().map(|p| p.ln() + (r / p).ln_1p()), times.len());
        let nf = n as f64;
        let tau = model.tau();
        let offset = -nf * (model.psi().integral(tau) + r * tau - 0.5 * r * delta - tau);
        Ok(Self {
            n,
            times,
            shifted,
            psi_at,
            cum_lo,
            cum_hi,
            offset,
            slope: nf * r,
            model,
        })
    }

    pub fn model(&self) -> &IntensityModel {
        &self.model
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Pooled, sorted event times.
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    fn ramp_slope(&self) -> f64 {
        let delta = self.model.delta();
        if delta > 0.0 {
            self.model.r() / delta
        } else {
            0.0
        }
    }

    fn outer_terms(&self, before: usize, ramp_end: usize) -> f64 {
        let total = self.cum_hi[self.times.len()];
        self.cum_lo[before] + (total - self.cum_hi[ramp_end]) + self.offset
    }

    /// `ℓ(θ)` without domain checks.
    pub fn value(&self, theta: f64) -> f64 {
        let before = self.times.partition_point(|&t| t < theta);
        let ramp_end = self.shifted.partition_point(|&s| s < theta);
        let k = self.ramp_slope();
        let ramp: f64 = (before..ramp_end)
            .map(|i| (self.psi_at[i] + k * (self.times[i] - theta)).ln())
            .sum();
        self.outer_terms(before, ramp_end) + ramp + self.slope * theta
    }

    /// `ℓ(θ)` for θ in the open parameter interval.
    pub fn log_likelihood(&self, theta: f64) -> Result<f64> {
        self.model.check_theta(theta)?;
        Ok(self.value(theta))
    }

    /// Cells partitioning `[α, β]` at event times, shifted event times and
    /// any `extra` points (e.g. prior knots).
    pub fn cells(&self, extra: &[f64]) -> Vec<Cell> {
        let (alpha, beta) = (self.model.alpha(), self.model.beta());
        let inside = |x: &f64| *x > alpha && *x < beta;
        let mut pts: Vec<f64> = self
            .times
            .iter()
            .chain(&self.shifted)
            .chain(extra)
            .copied()
            .filter(inside)
            .collect();
        pts.push(alpha);
        pts.push(beta);
        pts.sort_unstable_by(f64::total_cmp);
        pts.dedup();

        let r = self.model.r();
        let (mut before, mut ramp_end) = (0usize, 0usize);
        let mut cells = Vec::with_capacity(pts.len().saturating_sub(1));
        for w in pts.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            while before < self.times.len() && self.times[before] <= lo {
                before += 1;
            }
            while ramp_end < self.shifted.len() && self.shifted[ramp_end] <= lo {
                ramp_end += 1;
            }
            let ramp_max = if r >= 0.0 {
                self.cum_hi[ramp_end] - self.cum_hi[before]
            } else {
                self.cum_lo[ramp_end] - self.cum_lo[before]
            };
            let lin = self.slope * if r >= 0.0 { hi } else { lo };
            cells.push(Cell {
                lo,
                hi,
                before,
                ramp_end,
                upper_bound: self.outer_terms(before, ramp_end) + ramp_max + lin,
            });
        }
        cells
    }

    /// Smooth representation of ℓ restricted to one cell.
    pub fn kernel(&self, cell: &Cell) -> CellKernel {
        let center = 0.5 * (cell.lo + cell.hi);
        let k = self.ramp_slope();
        let idx = cell.before..cell.ramp_end;
        let outer = self.outer_terms(cell.before, cell.ramp_end);
        let values: Vec<f64> = idx.map(|i| self.psi_at[i] + k * (self.times[i] - center)).collect();
        let log_sum: f64 = values.iter().map(|a| a.ln()).sum();
        let base = outer + log_sum + self.slope * center;
        let repr = if values.is_empty() || k == 0.0 {
            Repr::Linear
        } else {
            let min_val = values.iter().copied().fold(f64::INFINITY, f64::min);
            let radius = (k * 0.5 * (cell.hi - cell.lo)).abs() / min_val;
            if radius <= SERIES_RADIUS {
                let mut sums = [0.0f64; SERIES_TERMS];
                for a in &values {
                    let inv = 1.0 / a;
                    let mut p = inv;
                    for s in sums.iter_mut() {
                        *s += p;
                        p *= inv;
                    }
                }
                Repr::Series(sums)
            } else {
                Repr::Direct(values)
            }
        };
        CellKernel {
            lo: cell.lo,
            hi: cell.hi,
            center,
            base,
            slope: self.slope,
            k,
            repr,
        }
    }
}

#[derive(Debug, Clone)]
enum Repr {
    /// No ramp events: ℓ is affine on the cell.
    Linear,
    /// Power sums `S_m = Σ A_i^{-m}` of the ramp values at the center.
    Series([f64; SERIES_TERMS]),
    Direct(Vec<f64>),
}

/// ℓ on one cell: `base + slope·h + Σ ln(1 - k h / A_i)` with `h = θ - center`.
#[derive(Debug, Clone)]
pub struct CellKernel {
    pub lo: f64,
    pub hi: f64,
    center: f64,
    base: f64,
    slope: f64,
    k: f64,
    repr: Repr,
}

impl CellKernel {
    /// `ℓ(θ) - ℓ(center)`, computed without the large constant.
    pub fn local(&self, theta: f64) -> f64 {
        let h = theta - self.center;
        let lin = self.slope * h;
        match &self.repr {
            Repr::Linear => lin,
            Repr::Series(s) => {
                let z = self.k * h;
                let mut acc = 0.0;
                for m in (0..SERIES_TERMS).rev() {
                    acc = acc * z + s[m] / (m + 1) as f64;
                }
                lin - z * acc
            }
            Repr::Direct(vals) => {
                let kh = self.k * h;
                lin + vals.iter().map(|a| (-kh / a).ln_1p()).sum::<f64>()
            }
        }
    }

    pub fn value(&self, theta: f64) -> f64 {
        self.base + self.local(theta)
    }

    /// `ℓ(center)`.
    pub fn center_value(&self) -> f64 {
        self.base
    }

    pub fn derivative(&self, theta: f64) -> f64 {
        let h = theta - self.center;
        match &self.repr {
            Repr::Linear => self.slope,
            Repr::Series(s) => {
                let z = self.k * h;
                let mut acc = 0.0;
                for m in (0..SERIES_TERMS).rev() {
                    acc = acc * z + s[m];
                }
                self.slope - self.k * acc
            }
            Repr::Direct(vals) => {
                let kh = self.k * h;
                self.slope - vals.iter().map(|a| self.k / (a - kh)).sum::<f64>()
            }
        }
    }

    /// Maximizer and maximum of the (concave) cell function on `[lo, hi]`.
    pub fn maximize(&self) -> (f64, f64) {
        let theta = match self.repr {
            Repr::Linear => {
                if self.slope > 0.0 {
                    self.hi
                } else {
                    self.lo
                }
            }
            _ => {
                if self.derivative(self.lo) <= 0.0 {
                    self.lo
                } else if self.derivative(self.hi) >= 0.0 {
                    self.hi
                } else {
                    let tol = 1e-13 * self.hi.abs().max(1.0);
                    golden_section_max(|t| self.local(t), self.lo, self.hi, tol).0
                }
            }
        };
        (theta, self.value(theta))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::intensity::Baseline;
    use crate::sampler::sample_observations;
    use approx::assert_relative_eq;

    fn direct(model: &IntensityModel, n: usize, times: &[f64], theta: f64) -> f64 {
        let events: f64 = times.iter().map(|&t| model.rate(theta, t).ln()).sum();
        events - n as f64 * (model.total_mass(theta) - model.tau())
    }

    #[test]
    fn matches_direct_sum() {
        let model = IntensityModel::new(
            Baseline::PiecewiseLinear(vec![[0.0, 1.0], [0.4, 2.5], [1.0, 1.5]]),
            1.2,
            0.07,
            1.0,
            0.1,
            0.9,
        )
        .unwrap();
        let s = sample_observations(&model, 0.5, 40, 3, 0).unwrap();
        let ll = LogLikelihood::new(&s).unwrap();
        for i in 0..=200 {
            let th = 0.1 + 0.8 * i as f64 / 200.0;
            assert_relative_eq!(ll.value(th), direct(&model, 40, &s.pooled_events(), th), epsilon = 1e-9);
        }
    }

    #[test]
    fn kernels_agree_with_value_and_bound() {
        for delta in [0.0, 1e-4, 0.05, 0.3] {
            for r in [1.5, -0.6] {
                let model = IntensityModel::constant(1.0, r, delta, 1.0, 0.2, 0.65).unwrap();
                let s = sample_observations(&model, 0.4, 30, 9, 1).unwrap();
                let ll = LogLikelihood::new(&s).unwrap();
                let cells = ll.cells(&[]);
                assert_eq!(cells.first().unwrap().lo, 0.2);
                assert_eq!(cells.last().unwrap().hi, 0.65);
                for c in &cells {
                    let kern = ll.kernel(c);
                    for f in [0.1, 0.5, 0.9] {
                        let th = c.lo + f * (c.hi - c.lo);
                        assert_relative_eq!(kern.value(th), ll.value(th), epsilon = 1e-9, max_relative = 1e-12);
                    }
                    let (th, v) = kern.maximize();
                    assert!(th >= c.lo && th <= c.hi);
                    assert!(v <= c.upper_bound + 1e-9);
                    let inner = 0.5 * (c.lo + c.hi);
                    assert!(v >= kern.value(inner) - 1e-12);
                }
            }
        }
    }

    #[test]
    fn derivative_matches_difference() {
        let model = IntensityModel::constant(2.0, 1.0, 0.2, 1.0, 0.2, 0.7).unwrap();
        let s = sample_observations(&model, 0.4, 20, 5, 0).unwrap();
        let ll = LogLikelihood::new(&s).unwrap();
        for c in ll.cells(&[]).iter().filter(|c| c.hi - c.lo > 1e-3) {
            let kern = ll.kernel(c);
            let m = 0.5 * (c.lo + c.hi);
            let h = 1e-6 * (c.hi - c.lo);
            let fd = (kern.local(m + h) - kern.local(m - h)) / (2.0 * h);
            assert_relative_eq!(kern.derivative(m), fd, epsilon = 1e-4, max_relative = 1e-5);
        }
    }

    #[test]
    fn empty_sample_is_linear() {
        let model = IntensityModel::constant(1.0, 2.0, 0.1, 1.0, 0.2, 0.8).unwrap();
        let ll = LogLikelihood::from_events(model, 5, vec![]).unwrap();
        // -n[λ₀τ + r(τ-θ) - rδ/2 - τ]
        assert_relative_eq!(ll.value(0.5), -5.0 * (1.0 + 2.0 * 0.5 - 0.1 - 1.0), epsilon = 1e-14);
        assert_eq!(ll.cells(&[]).len(), 1);
    }

    #[test]
    fn rejects_events_outside_window() {
        let model = IntensityModel::constant(1.0, 2.0, 0.1, 1.0, 0.2, 0.8).unwrap();
        assert!(LogLikelihood::from_events(model, 1, vec![1.5]).is_err());
    }
}
