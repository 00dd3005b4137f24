//! Adaptive Simpson quadrature over piecewise-smooth integrands.
//!
//! Integrands in this crate are smooth between known breakpoints (ramp ends,
//! baseline knots, event times), so every integral is split at those points
//! first and each smooth piece is integrated adaptively.

use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;

/// Default absolute tolerance per smooth piece.
pub const PIECE_ABS_TOL: f64 = 1e-10;

/// Values that can be integrated: real or complex scalars, or small vectors.
pub trait QuadValue: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> {
    fn zero() -> Self;
    fn magnitude(&self) -> f64;
}

impl QuadValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn magnitude(&self) -> f64 {
        self.abs()
    }
}

impl QuadValue for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn magnitude(&self) -> f64 {
        self.norm()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult<T> {
    pub value: T,
    /// Sum of the local Richardson error estimates.
    pub error: f64,
    pub evaluations: usize,
    /// False if some subinterval hit the depth limit before meeting its tolerance.
    pub converged: bool,
}

/// Adaptive Simpson rule with Richardson extrapolation.
#[derive(Debug, Clone, Copy)]
pub struct Simpson {
    pub abs_tol: f64,
    pub max_depth: u32,
    /// Levels of bisection performed unconditionally, so that integrands
    /// which happen to agree at the coarse nodes are not accepted early.
    pub min_depth: u32,
}

impl Default for Simpson {
    fn default() -> Self {
        Self {
            abs_tol: PIECE_ABS_TOL,
            max_depth: 48,
            min_depth: 2,
        }
    }
}

impl Simpson {
    pub fn with_tol(abs_tol: f64) -> Self {
        Self {
            abs_tol,
            ..Self::default()
        }
    }

    /// Integrates `f` over `[a, b]`. An empty or reversed interval yields zero.
    pub fn integrate<T, F>(&self, f: &mut F, a: f64, b: f64) -> QuadResult<T>
    where
        T: QuadValue,
        F: FnMut(f64) -> T,
    {
        if !(b > a) {
            return QuadResult {
                value: T::zero(),
                error: 0.0,
                evaluations: 0,
                converged: true,
            };
        }
        let fa = f(a);
        let fb = f(b);
        let m = 0.5 * (a + b);
        let fm = f(m);
        let whole = (fa + fm * 4.0 + fb) * ((b - a) / 6.0);
        let mut acc = Accumulator::<T> {
            evaluations: 3,
            ..Default::default()
        };
        self.recurse(f, [a, m, b], [fa, fm, fb], whole, self.abs_tol, 0, &mut acc);
        QuadResult {
            value: acc.value,
            error: acc.error,
            evaluations: acc.evaluations,
            converged: acc.converged,
        }
    }

    /// Integrates over consecutive pieces `[p_k, p_{k+1}]` of a sorted
    /// breakpoint list, applying the tolerance to each piece separately.
    pub fn integrate_pieces<T, F>(&self, f: &mut F, points: &[f64]) -> QuadResult<T>
    where
        T: QuadValue,
        F: FnMut(f64) -> T,
    {
        let mut total = QuadResult {
            value: T::zero(),
            error: 0.0,
            evaluations: 0,
            converged: true,
        };
        for w in points.windows(2) {
            let piece = self.integrate(f, w[0], w[1]);
            total.value = total.value + piece.value;
            total.error += piece.error;
            total.evaluations += piece.evaluations;
            total.converged &= piece.converged;
        }
        total
    }

    #[allow(clippy::too_many_arguments)]
    fn recurse<T, F>(
        &self,
        f: &mut F,
        x: [f64; 3],
        fx: [T; 3],
        whole: T,
        tol: f64,
        depth: u32,
        acc: &mut Accumulator<T>,
    ) where
        T: QuadValue,
        F: FnMut(f64) -> T,
    {
        let [a, m, b] = x;
        let [fa, fm, fb] = fx;
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        acc.evaluations += 2;
        let left = (fa + flm * 4.0 + fm) * ((m - a) / 6.0);
        let right = (fm + frm * 4.0 + fb) * ((b - m) / 6.0);
        let delta = left + right - whole;
        let err = delta.magnitude();
        let exhausted = depth >= self.max_depth || !(lm > a && rm < b && m > lm && rm > m);
        if depth >= self.min_depth && (err <= 15.0 * tol || exhausted) {
            acc.value = acc.value + left + right + delta * (1.0 / 15.0);
            acc.error += err / 15.0;
            if err > 15.0 * tol {
                acc.converged = false;
            }
            return;
        }
        self.recurse(f, [a, lm, m], [fa, flm, fm], left, 0.5 * tol, depth + 1, acc);
        self.recurse(f, [m, rm, b], [fm, frm, fb], right, 0.5 * tol, depth + 1, acc);
    }
}

struct Accumulator<T> {
    value: T,
    error: f64,
    evaluations: usize,
    converged: bool,
}

impl<T: QuadValue> Default for Accumulator<T> {
    fn default() -> Self {
        Self {
            value: T::zero(),
            error: 0.0,
            evaluations: 0,
            converged: true,
        }
    }
}

/// Sorts, clips to `[lo, hi]` and deduplicates candidate breakpoints, always
/// keeping both interval ends.
pub fn breakpoint_grid(lo: f64, hi: f64, candidates: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut pts: Vec<f64> = candidates
        .into_iter()
        .filter(|p| p.is_finite() && *p > lo && *p < hi)
        .collect();
    pts.push(lo);
    pts.push(hi);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}
