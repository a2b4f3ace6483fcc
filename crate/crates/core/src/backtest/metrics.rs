use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TRADING_DAYS: f64 = 252.0;

/// Performance summary of a daily return series.
///
/// When the excess-return series has zero volatility the Sharpe ratios are
/// reported as `+inf` / `-inf` following the sign of the mean (zero when the
/// mean is zero as well); see [`Metrics::zero_volatility`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mean_excess_daily: f64,
    pub vol_daily: f64,
    pub sharpe_daily: f64,
    pub sharpe_annualized: f64,
    pub max_drawdown: f64,
}

impl Metrics {
    pub fn zero_volatility(&self) -> bool {
        self.vol_daily == 0.0
    }
}

/// Largest peak-to-trough decline as a fraction of the running peak.
pub fn max_drawdown(values: &[f64]) -> f64 {
    let mut peak = f64::NEG_INFINITY;
    let mut worst = 0.0_f64;
    for &v in values {
        peak = peak.max(v);
        if peak > 0.0 {
            worst = worst.max((peak - v) / peak);
        }
    }
    worst.clamp(0.0, 1.0)
}

/// Mean and sample standard deviation (denominator `len - 1`).
pub(crate) fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn compute_metrics(portfolio_returns: &[f64], rf: &[f64], account_values: &[f64]) -> Result<Metrics> {
    if portfolio_returns.is_empty() || account_values.is_empty() {
        return Err(Error::InsufficientData("empty return series".into()));
    }
    if portfolio_returns.len() != rf.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} returns vs {} risk-free rates",
            portfolio_returns.len(),
            rf.len()
        )));
    }
    if account_values.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::InvalidParameter("account values must be positive".into()));
    }
    let excess: Vec<f64> = portfolio_returns.iter().zip(rf).map(|(r, f)| r - f).collect();
    let (mean, mut vol) = mean_std(&excess);
    // a constant series can leave rounding noise in the deviation
    if vol <= 1e-12 * mean.abs() {
        vol = 0.0;
    }
    let sharpe = if vol > 0.0 {
        mean / vol
    } else if mean > 0.0 {
        f64::INFINITY
    } else if mean < 0.0 {
        f64::NEG_INFINITY
    } else {
        0.0
    };
    Ok(Metrics {
        mean_excess_daily: mean,
        vol_daily: vol,
        sharpe_daily: sharpe,
        sharpe_annualized: sharpe * TRADING_DAYS.sqrt(),
        max_drawdown: max_drawdown(account_values),
    })
}
