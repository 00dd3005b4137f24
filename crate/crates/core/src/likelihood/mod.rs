//! Log-likelihood, normalized likelihood ratios and their deterministic
//! Hellinger and characteristic-function oracles.

mod charfn;
mod hellinger;
mod surface;

pub use charfn::{char_fn_log_lr, limit_char_fn};
pub use hellinger::{
    hellinger_half_moment, hellinger_increment, hellinger_integral, increment_bound_fast, increment_bound_slow,
    tail_bound_kappa,
};
pub use surface::{Cell, CellKernel, LogLikelihood};

use crate::error::{Error, Result};
use crate::intensity::IntensityModel;
use crate::sampler::SampleSet;
use crate::schedule::RateSchedule;

pub fn log_likelihood(sample: &SampleSet, theta: f64) -> Result<f64> {
    LogLikelihood::new(sample)?.log_likelihood(theta)
}

/// Checks `θ + uφ ∈ (α, β)` and returns the shifted location.
pub(crate) fn local_point(model: &IntensityModel, theta: f64, u: f64, phi: f64) -> Result<f64> {
    model.check_theta(theta)?;
    let th = theta + u * phi;
    if th > model.alpha() && th < model.beta() {
        Ok(th)
    } else {
        Err(Error::Domain {
            what: "u",
            value: u,
            domain: format!("({}, {})", (model.alpha() - theta) / phi, (model.beta() - theta) / phi),
        })
    }
}

impl LogLikelihood {
    /// `ln Z_n(u) = ℓ(θ + uφ) - ℓ(θ)`.
    pub fn log_lr(&self, theta: f64, u: f64, phi: f64) -> Result<f64> {
        let th = local_point(self.model(), theta, u, phi)?;
        if u == 0.0 {
            return Ok(0.0);
        }
        Ok(self.value(th) - self.value(theta))
    }

    /// LAN central term `Δ_n` at θ for ramp width `delta_n`.
    pub fn lan_central_term(&self, theta: f64, delta_n: f64) -> f64 {
        let model = self.model();
        let r = model.r();
        let a = model.psi().eval(theta);
        let nd = self.n() as f64 * delta_n;
        let t = self.times();
        let lo = t.partition_point(|&x| x < theta);
        let hi = t.partition_point(|&x| x < theta + delta_n);
        let sum: f64 = t[lo..hi].iter().map(|&x| 1.0 / (a + r * (x - theta) / delta_n)).sum();
        -r / nd.sqrt() * sum + r * nd.sqrt()
    }
}

/// `ln Z_n(u)` for the sample, with `φ_n` taken from the schedule.
pub fn log_lr(sample: &SampleSet, theta: f64, u: f64, schedule: &RateSchedule, n: usize) -> Result<f64> {
    if n != sample.n() {
        return Err(Error::InvalidInput(format!(
            "n = {n} does not match the sample size {}",
            sample.n()
        )));
    }
    LogLikelihood::new(sample)?.log_lr(theta, u, schedule.phi(n))
}

pub fn lan_central_term(sample: &SampleSet, theta: f64, delta_n: f64) -> Result<f64> {
    if !(delta_n > 0.0) {
        return Err(Error::InvalidInput(format!("delta_n must be positive, got {delta_n}")));
    }
    Ok(LogLikelihood::new(sample)?.lan_central_term(theta, delta_n))
}
