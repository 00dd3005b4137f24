//! Kolmogorov–Smirnov distances and small descriptive statistics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2)
}

fn sorted(xs: &[f64]) -> Result<Vec<f64>> {
    if xs.iter().any(|x| x.is_nan()) {
        return Err(Error::InvalidInput("NaN in KS sample".into()));
    }
    let mut v = xs.to_vec();
    v.sort_unstable_by(f64::total_cmp);
    Ok(v)
}

/// One-sample statistic `sup |F_n - F|` against a continuous CDF.
pub fn ks_one_sample<F: Fn(f64) -> f64>(xs: &[f64], cdf: F) -> Result<f64> {
    if xs.is_empty() {
        return Err(Error::InvalidInput("KS needs a non-empty sample".into()));
    }
    let v = sorted(xs)?;
    let n = v.len() as f64;
    Ok(v.iter().enumerate().fold(0.0f64, |d, (i, &x)| {
        let f = cdf(x);
        d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n)
    }))
}

/// Two-sample statistic `sup |F_n - G_m|`, ties handled by stepping over
/// equal values in both samples together.
pub fn ks_two_sample(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.is_empty() || ys.is_empty() {
        return Err(Error::InvalidInput("KS needs non-empty samples".into()));
    }
    let a = sorted(xs)?;
    let b = sorted(ys)?;
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] == x {
            i += 1;
        }
        while j < b.len() && b[j] == x {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    Ok(d)
}

/// Asymptotic Kolmogorov quantile `c(α) = sqrt(-ln(α/2)/2)`.
pub fn ks_coefficient(level: f64) -> f64 {
    (-(level / 2.0).ln() / 2.0).sqrt()
}

pub fn ks_critical_one_sample(n: usize, level: f64) -> f64 {
    ks_coefficient(level) / (n as f64).sqrt()
}

pub fn ks_critical_two_sample(n: usize, m: usize, level: f64) -> f64 {
    let (n, m) = (n as f64, m as f64);
    ks_coefficient(level) * ((n + m) / (n * m)).sqrt()
}

/// Sample moments with Monte Carlo standard errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub count: usize,
    pub mean: f64,
    /// Unbiased sample variance.
    pub variance: f64,
    pub second_moment: f64,
    pub fourth_moment: f64,
    pub mean_abs: f64,
    pub mean_se: f64,
    pub second_moment_se: f64,
}

impl Moments {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let variance = if xs.len() > 1 {
            xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            f64::NAN
        };
        let second_moment = xs.iter().map(|x| x * x).sum::<f64>() / n;
        let fourth_moment = xs.iter().map(|x| x.powi(4)).sum::<f64>() / n;
        let mean_abs = xs.iter().map(|x| x.abs()).sum::<f64>() / n;
        let sq_var = if xs.len() > 1 {
            xs.iter().map(|x| (x * x - second_moment).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            f64::NAN
        };
        Self {
            count: xs.len(),
            mean,
            variance,
            second_moment,
            fourth_moment,
            mean_abs,
            mean_se: (variance / n).sqrt(),
            second_moment_se: (sq_var / n).sqrt(),
        }
    }

    /// Standard error of the sample variance, from the fourth central moment.
    pub fn variance_se(xs: &[f64]) -> f64 {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let m2 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
        ((m4 - m2 * m2) / n).sqrt()
    }
}
