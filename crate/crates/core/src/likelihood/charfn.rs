//! Characteristic functions of `(ln Z_n(u), ln Z_n(v))` and of the limit pair.

use num_complex::Complex64;

use crate::error::Result;
use crate::intensity::IntensityModel;
use crate::quadrature::Simpson;
use crate::schedule::RateSchedule;

use super::local_point;

/// `E exp{i x ln Z_n(u) + i y ln Z_n(v)}` under `P_θ`, with `δ = δ_n`.
///
/// Since `ln Z_n(u) = Σ ln(λ_{θ+uφ}/λ_θ)(t_i) + n r u φ`, the Poisson
/// exponential formula gives a deterministic phase times
/// `exp{n ∫ (e^{i x ln(λ_u/λ_θ) + i y ln(λ_v/λ_θ)} - 1) λ_θ dt}`.
#[allow(clippy::too_many_arguments)]
pub fn char_fn_log_lr(
    model: &IntensityModel,
    theta: f64,
    schedule: &RateSchedule,
    n: usize,
    u: f64,
    v: f64,
    x: f64,
    y: f64,
) -> Result<Complex64> {
    let model = model.with_delta(schedule.delta(n))?;
    let phi = schedule.phi(n);
    let tu = local_point(&model, theta, u, phi)?;
    let tv = local_point(&model, theta, v, phi)?;
    let pts = model.breakpoints(&[theta, tu, tv]);
    let mut f = |t: f64| {
        let l0 = model.rate(theta, t);
        let p = x * (model.rate(tu, t) / l0).ln() + y * (model.rate(tv, t) / l0).ln();
        let half = (0.5 * p).sin();
        Complex64::new(-2.0 * half * half, p.sin()) * l0
    };
    let integral: Complex64 = Simpson::default().integrate_pieces(&mut f, &pts).value;
    let nf = n as f64;
    let phase = nf * model.r() * phi * (u * x + v * y);
    Ok((integral * nf + Complex64::new(0.0, phase)).exp())
}

/// Characteristic function of `(ln Z★(u), ln Z★(v))` for any sign pattern.
///
/// Each side is a Poisson process (rate `b` for u > 0, `a` for u < 0);
/// the exponent is accumulated over the increments between the sorted
/// `|u|`, `|v|` on that side.
pub fn limit_char_fn(a: f64, b: f64, u: f64, v: f64, x: f64, y: f64) -> Complex64 {
    let mut log = Complex64::new(0.0, (b - a) * (u * x + v * y));
    for (positive, rate, jump) in [(true, b, (a / b).ln()), (false, a, (b / a).ln())] {
        let mut pts: Vec<(f64, f64)> = [(u, x), (v, y)]
            .into_iter()
            .filter(|&(p, _)| if positive { p > 0.0 } else { p < 0.0 })
            .map(|(p, c)| (p.abs(), c))
            .collect();
        pts.sort_by(|l, r| l.0.total_cmp(&r.0));
        let mut start = 0.0;
        for k in 0..pts.len() {
            let coef: f64 = pts[k..].iter().map(|p| p.1).sum();
            let len = pts[k].0 - start;
            log += (Complex64::new(0.0, jump * coef).exp() - 1.0) * (rate * len);
            start = pts[k].0;
        }
    }
    log.exp()
}
