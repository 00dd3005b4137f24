//! How the transition width `δ_n` and the normalization rate `φ_n` scale
//! with the number of observed trajectories.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `n δ_n → ∞`: LAN with rate `sqrt(δ_n / n)`.
    Slow,
    /// `n δ_n → 0`: change-point behavior with rate `1/n`.
    Fast,
    /// `n δ_n → c > 0`; no limit theory, exploratory only.
    Critical(f64),
    /// Constant `δ`: the regular model with rate `1/sqrt(n)`.
    FixedDelta,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaRule {
    /// `δ_n = d · n^(-gamma)`
    Power {
        d: f64,
        gamma: f64,
    },
    Constant(f64),
}

impl DeltaRule {
    pub fn delta(&self, n: usize) -> f64 {
        match *self {
            DeltaRule::Power { d, gamma } => d * (n as f64).powf(-gamma),
            DeltaRule::Constant(c) => c,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateSchedule {
    pub regime: Regime,
    pub delta_rule: DeltaRule,
}

impl RateSchedule {
    pub fn slow_power(d: f64, gamma: f64) -> Self {
        Self {
            regime: Regime::Slow,
            delta_rule: DeltaRule::Power { d, gamma },
        }
    }

    pub fn fast_power(d: f64, gamma: f64) -> Self {
        Self {
            regime: Regime::Fast,
            delta_rule: DeltaRule::Power { d, gamma },
        }
    }

    pub fn fixed(delta: f64) -> Self {
        Self {
            regime: Regime::FixedDelta,
            delta_rule: DeltaRule::Constant(delta),
        }
    }

    pub fn delta(&self, n: usize) -> f64 {
        self.delta_rule.delta(n)
    }

    pub fn phi(&self, n: usize) -> f64 {
        let nf = n as f64;
        match self.regime {
            Regime::Slow => (self.delta(n) / nf).sqrt(),
            Regime::Fast | Regime::Critical(_) => 1.0 / nf,
            Regime::FixedDelta => 1.0 / nf.sqrt(),
        }
    }

    /// Checks the rule against the regime on a sorted grid of sample sizes.
    pub fn validate(&self, n_grid: &[usize]) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if n_grid.is_empty() || n_grid.contains(&0) {
            return bad("n_grid must be non-empty with positive entries".into());
        }
        if n_grid.windows(2).any(|w| w[1] <= w[0]) {
            return bad("n_grid must be strictly increasing".into());
        }
        match self.delta_rule {
            DeltaRule::Power { d, gamma } if !(d > 0.0 && gamma > 0.0 && d.is_finite() && gamma.is_finite()) => {
                return bad(format!(
                    "power rule needs d > 0 and gamma > 0, got d={d}, gamma={gamma}"
                ));
            }
            DeltaRule::Constant(c) if !(c >= 0.0 && c.is_finite()) => {
                return bad(format!("constant delta must be >= 0, got {c}"));
            }
            _ => {}
        }
        let nd: Vec<f64> = n_grid.iter().map(|&n| n as f64 * self.delta(n)).collect();
        let last = *nd.last().unwrap();
        match self.regime {
            Regime::Slow => {
                if nd.windows(2).any(|w| w[1] <= w[0]) || last <= 1.0 {
                    return bad(format!(
                        "slow regime needs n*delta_n increasing and > 1 at the largest n (got {last})"
                    ));
                }
            }
            Regime::Fast => {
                if nd.windows(2).any(|w| w[1] >= w[0]) || last >= 1.0 {
                    return bad(format!(
                        "fast regime needs n*delta_n decreasing and < 1 at the largest n (got {last})"
                    ));
                }
            }
            Regime::Critical(c) => {
                if !(c > 0.0 && c.is_finite()) {
                    return bad(format!("critical regime needs c > 0, got {c}"));
                }
            }
            Regime::FixedDelta => {
                if !matches!(self.delta_rule, DeltaRule::Constant(c) if c > 0.0) {
                    return bad("fixed_delta regime needs a constant delta > 0".into());
                }
            }
        }
        Ok(())
    }
}
