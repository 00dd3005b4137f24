//! Closed-form Hellinger quantities of the Poisson experiment and the
//! corresponding upper bounds.

use crate::error::Result;
use crate::intensity::IntensityModel;
use crate::quadrature::Simpson;
use crate::schedule::RateSchedule;

use super::local_point;

/// `∫₀^τ (√λ_{θ_u} - √λ_{θ_v})² dt` for the model's own δ.
pub fn hellinger_integral(model: &IntensityModel, theta_u: f64, theta_v: f64) -> f64 {
    if theta_u == theta_v {
        return 0.0;
    }
    let pts = model.breakpoints(&[theta_u, theta_v]);
    let mut f = |t: f64| {
        let p = model.rate(theta_u, t);
        let q = model.rate(theta_v, t);
        let s = p.sqrt() + q.sqrt();
        (p - q) * (p - q) / (s * s)
    };
    Simpson::default().integrate_pieces(&mut f, &pts).value
}

/// `E_θ Z_n^{1/2}(u) = exp{-(n/2) ∫(√λ_{θ+uφ} - √λ_θ)²}` with `δ = δ_n`.
pub fn hellinger_half_moment(
    model: &IntensityModel,
    theta: f64,
    u: f64,
    schedule: &RateSchedule,
    n: usize,
) -> Result<f64> {
    let model = model.with_delta(schedule.delta(n))?;
    let th = local_point(&model, theta, u, schedule.phi(n))?;
    Ok((-0.5 * n as f64 * hellinger_integral(&model, th, theta)).exp())
}

/// `E_θ |Z_n^{1/2}(u) - Z_n^{1/2}(v)|² = 2 - 2 exp{-(n/2) ∫(√λ_{θ+uφ} - √λ_{θ+vφ})²}`.
pub fn hellinger_increment(
    model: &IntensityModel,
    theta: f64,
    u: f64,
    v: f64,
    schedule: &RateSchedule,
    n: usize,
) -> Result<f64> {
    let model = model.with_delta(schedule.delta(n))?;
    let phi = schedule.phi(n);
    let tu = local_point(&model, theta, u, phi)?;
    let tv = local_point(&model, theta, v, phi)?;
    Ok(-2.0 * (-0.5 * n as f64 * hellinger_integral(&model, tu, tv)).exp_m1())
}

/// Increment bound `C |u-v|²`, `C = max{4, r²/(4λ₀)}`, valid in the slow regime with `nδ_n ≥ 1`.
pub fn increment_bound_slow(lambda0: f64, r: f64, u: f64, v: f64) -> f64 {
    4.0f64.max(r * r / (4.0 * lambda0)) * (u - v).powi(2)
}

/// Increment bound `r |u-v|` of the fast regime.
pub fn increment_bound_fast(r: f64, u: f64, v: f64) -> f64 {
    r * (u - v).abs()
}

/// `κ = r²/(12(λ₀+r))` in the tail bound `E Z^{1/2}(u) ≤ exp{-κ min(|u|, u²)}`.
pub fn tail_bound_kappa(lambda0: f64, r: f64) -> f64 {
    r * r / (12.0 * (lambda0 + r))
}
