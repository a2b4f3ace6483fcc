use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Volatility-driven window resizing rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowPolicy {
    pub m_init: usize,
    /// Relative volatility change that triggers a resize.
    pub h: f64,
    /// Fraction removed from the window on a shrink.
    pub c_minus: f64,
    /// Multiplier applied to the window on a grow.
    pub c_plus: f64,
    pub m_min: usize,
    pub m_max: usize,
}

impl WindowPolicy {
    /// Defaults for a model with `n_factors` regressors.
    pub fn for_factors(n_factors: usize) -> Self {
        Self {
            m_init: 60,
            h: 0.1,
            c_minus: 0.16,
            c_plus: 1.16,
            m_min: n_factors + 5,
            m_max: 252,
        }
    }

    pub fn validate(&self, n_factors: usize) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.h > 0.0 && self.h < 1.0) {
            return bad(format!("h must lie in (0, 1), got {}", self.h));
        }
        if !(self.c_minus > 0.0 && self.c_minus < 1.0) {
            return bad(format!("c_minus must lie in (0, 1), got {}", self.c_minus));
        }
        if !(self.c_plus >= 1.0 && self.c_plus.is_finite()) {
            return bad(format!("c_plus must be >= 1, got {}", self.c_plus));
        }
        if self.m_min < n_factors + 2 {
            return bad(format!("m_min {} is below J + 2 = {}", self.m_min, n_factors + 2));
        }
        if !(self.m_min <= self.m_init && self.m_init <= self.m_max) {
            return bad(format!(
                "need m_min <= m_init <= m_max, got {} / {} / {}",
                self.m_min, self.m_init, self.m_max
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Trigger {
    Shrink,
    Grow,
    Hold,
}

impl Trigger {
    pub fn as_str(self) -> &'static str {
        match self {
            Trigger::Shrink => "shrink",
            Trigger::Grow => "grow",
            Trigger::Hold => "hold",
        }
    }
}

/// Next window size given this block's volatility and the previous one.
///
/// A rise to `(1+h)σ*` or more shrinks the window to `(1-c₋)M`; a fall to
/// `(1-h)σ*` or less grows it to `c₊M`. Rounded sizes always move at least
/// one step in the triggered direction, then are clamped to
/// `[m_min, m_max]`.
pub fn adjust_window(sigma_now: f64, sigma_prev: f64, policy: &WindowPolicy, m: usize) -> (usize, Trigger) {
    let mf = m as f64;
    let (next, trigger) = if sigma_now == sigma_prev {
        (m, Trigger::Hold)
    } else if sigma_now >= (1.0 + policy.h) * sigma_prev {
        let target = ((1.0 - policy.c_minus) * mf).round() as usize;
        (target.min(m.saturating_sub(1)), Trigger::Shrink)
    } else if sigma_now <= (1.0 - policy.h) * sigma_prev {
        let target = (policy.c_plus * mf).round() as usize;
        (target.max(m + 1), Trigger::Grow)
    } else {
        (m, Trigger::Hold)
    };
    (next.clamp(policy.m_min, policy.m_max), trigger)
}
