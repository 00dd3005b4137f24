//! Exact functionals of a two-sided, piecewise-exponential process.
//!
//! On each side the log-process at distance `w ≥ 0` from the origin is
//! `jump·N(w) + drift·w` for a counting process `N`. Between jumps it is
//! linear, so the sup over a segment sits at one of its ends and the
//! integrals of `Z` and `u·Z` have closed forms.

/// One side of the process. `rate` is the intensity of `N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct SideSpec {
    pub rate: f64,
    pub jump: f64,
    pub drift: f64,
}

impl SideSpec {
    /// Mean slope of the log-process.
    pub fn mean_drift(&self) -> f64 {
        self.rate * self.jump + self.drift
    }
}

/// `e^shift · (mass, first)` kept in scaled form.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LseSum {
    shift: f64,
    mass: f64,
    first: f64,
}

impl Default for LseSum {
    fn default() -> Self {
        Self {
            shift: f64::NEG_INFINITY,
            mass: 0.0,
            first: 0.0,
        }
    }
}

impl LseSum {
    pub fn add(&mut self, log_scale: f64, mass: f64, first: f64) {
        if log_scale > self.shift {
            let s = (self.shift - log_scale).exp();
            self.mass = self.mass * s + mass;
            self.first = self.first * s + first;
            self.shift = log_scale;
        } else {
            let s = (log_scale - self.shift).exp();
            self.mass += mass * s;
            self.first += first * s;
        }
    }

    pub fn merged(mut self, other: &LseSum) -> LseSum {
        self.add(other.shift, other.mass, other.first);
        self
    }

    pub fn ratio(&self) -> f64 {
        self.first / self.mass
    }
}

/// `((1 - e^{-x})/x, ∫₀¹ s e^{-xs} ds)` for `x ≥ 0`, sharing one `expm1`.
fn segment_factors(x: f64) -> (f64, f64) {
    if x < 1e-2 {
        // Taylor coefficients (-1)^m / (m! (m+1)) and (-1)^m / (m! (m+2))
        let phi = 1.0 + x * (-0.5 + x * (1.0 / 6.0 + x * (-1.0 / 24.0 + x * (1.0 / 120.0))));
        let g = 0.5 + x * (-1.0 / 3.0 + x * (0.125 + x * (-1.0 / 30.0 + x * (1.0 / 144.0 + x * (-1.0 / 840.0)))));
        return (phi, g);
    }
    let em1 = (-x).exp_m1();
    (-em1 / x, (-em1 - x * (em1 + 1.0)) / (x * x))
}

#[cfg(test)]
fn phi1(x: f64) -> f64 {
    segment_factors(x).0
}

#[cfg(test)]
fn g1(x: f64) -> f64 {
    segment_factors(x).1
}

/// Adds `∫ e^{ℓ(w)}` and `∫ w e^{ℓ(w)}` over `[start, end]`, where ℓ is
/// linear from `ls` to `le`, anchored at the larger end value.
fn add_segment(acc: &mut LseSum, start: f64, end: f64, ls: f64, le: f64) {
    let len = end - start;
    if !(len > 0.0) {
        return;
    }
    let x = (ls - le).abs();
    let (phi, g) = segment_factors(x);
    let m = len * phi;
    let t = len * len * g;
    if ls >= le {
        acc.add(ls, m, start * m + t);
    } else {
        acc.add(le, m, end * m - t);
    }
}

/// Sup candidate `(u, log value)`; ordering prefers larger values, then
/// smaller `|u|`, then negative `u`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Candidate {
    pub u: f64,
    pub log_value: f64,
}

impl Candidate {
    fn beats(&self, other: &Candidate) -> bool {
        if self.log_value != other.log_value {
            return self.log_value > other.log_value;
        }
        if self.u.abs() != other.u.abs() {
            return self.u.abs() < other.u.abs();
        }
        self.u < other.u
    }

    pub fn best(a: Candidate, b: Candidate) -> Candidate {
        if b.beats(&a) {
            b
        } else {
            a
        }
    }
}

/// Streaming state of one side: full inter-jump segments are folded into
/// the accumulators as soon as they are known; the open tail up to the
/// current window is added only when queried.
#[derive(Debug, Clone)]
pub(crate) struct SideState {
    pub spec: SideSpec,
    /// +1 for u ≥ 0, -1 for u ≤ 0.
    sign: f64,
    pub jumps: Vec<f64>,
    pub simulated_to: f64,
    done: usize,
    acc: LseSum,
    best: Candidate,
}

impl SideState {
    pub fn new(spec: SideSpec, positive: bool) -> Self {
        Self {
            spec,
            sign: if positive { 1.0 } else { -1.0 },
            jumps: Vec::new(),
            simulated_to: 0.0,
            done: 0,
            acc: LseSum::default(),
            best: Candidate { u: 0.0, log_value: 0.0 },
        }
    }

    fn segment_start(&self, k: usize) -> f64 {
        if k == 0 {
            0.0
        } else {
            self.jumps[k - 1]
        }
    }

    /// Folds every complete segment into the accumulators.
    pub fn absorb(&mut self) {
        while self.done < self.jumps.len() {
            let k = self.done;
            let start = self.segment_start(k);
            let end = self.jumps[k];
            self.fold(k, start, end);
            self.done += 1;
        }
    }

    fn level(&self, k: usize) -> f64 {
        self.spec.jump * k as f64
    }

    fn fold(&mut self, k: usize, start: f64, end: f64) {
        let ls = self.level(k) + self.spec.drift * start;
        let le = self.level(k) + self.spec.drift * end;
        add_segment(&mut self.acc, start, end, ls, le);
        let cand = if self.spec.drift < 0.0 {
            Candidate {
                u: self.sign * start,
                log_value: ls,
            }
        } else {
            Candidate {
                u: self.sign * end,
                log_value: le,
            }
        };
        self.best = Candidate::best(self.best, cand);
    }

    /// Accumulators and sup candidate over `[0, window]`, with the first
    /// moment expressed in `u` (negated on the negative side).
    pub fn query(&self, window: f64) -> (LseSum, Candidate) {
        debug_assert_eq!(self.done, self.jumps.len());
        let k = self.jumps.len();
        let start = self.segment_start(k);
        let mut acc = self.acc;
        let mut best = self.best;
        if window > start {
            let ls = self.level(k) + self.spec.drift * start;
            let le = self.level(k) + self.spec.drift * window;
            add_segment(&mut acc, start, window, ls, le);
            let cand = if self.spec.drift < 0.0 {
                Candidate {
                    u: self.sign * start,
                    log_value: ls,
                }
            } else {
                Candidate {
                    u: self.sign * window,
                    log_value: le,
                }
            };
            best = Candidate::best(best, cand);
        }
        acc.first *= self.sign;
        (acc, best)
    }
}
