//! Per-asset factor regressions and the absolute views derived from them.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::elastic_net::{fit_elastic_net_with, RegularizationParams, SolverOptions};
use crate::error::{Error, Result};
use crate::linalg::all_finite_vec;

/// Intercepts, loadings and residual variances for `n` assets on `J` factors.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorFit {
    pub alpha: DVector<f64>,
    /// `n x J`.
    pub beta: DMatrix<f64>,
    pub resid_var: DVector<f64>,
}

impl FactorFit {
    pub fn n_assets(&self) -> usize {
        self.alpha.len()
    }

    pub fn n_factors(&self) -> usize {
        self.beta.ncols()
    }
}

/// Linear views `P μ = q` with confidence (variance) `Ω`.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewSet {
    pub q: DVector<f64>,
    /// `K x n` pick matrix.
    pub pick: DMatrix<f64>,
    /// `K x K`.
    pub omega: DMatrix<f64>,
}

impl ViewSet {
    /// No views on `n` assets.
    pub fn empty(n: usize) -> Self {
        Self {
            q: DVector::zeros(0),
            pick: DMatrix::zeros(0, n),
            omega: DMatrix::zeros(0, 0),
        }
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    pub fn n_assets(&self) -> usize {
        self.pick.ncols()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.q.len();
        if self.pick.nrows() != k || self.omega.shape() != (k, k) {
            return Err(Error::DimensionMismatch(format!(
                "{k} views with pick {}x{} and omega {}x{}",
                self.pick.nrows(),
                self.pick.ncols(),
                self.omega.nrows(),
                self.omega.ncols()
            )));
        }
        if k > self.pick.ncols() {
            return Err(Error::InvalidParameter(format!(
                "{k} views on {} assets",
                self.pick.ncols()
            )));
        }
        Ok(())
    }
}

/// How views are formed from a factor fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ViewOptions {
    /// Lower bound applied to each diagonal entry of `Ω`.
    pub variance_floor: f64,
    /// Keep only this many views, choosing the assets with the smallest
    /// residual variance. `None` keeps one view per asset.
    pub max_views: Option<usize>,
}

impl Default for ViewOptions {
    fn default() -> Self {
        Self {
            variance_floor: 1e-10,
            max_views: None,
        }
    }
}

fn sample_variance(x: &DVector<f64>) -> f64 {
    let m = x.len() as f64;
    let mean = x.sum() / m;
    x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (m - 1.0)
}

/// Regresses every asset column of `returns` (`M x n`) on `factors`
/// (`M x J`). Fits are independent and run in parallel.
pub fn fit_factor_model(
    returns: &DMatrix<f64>,
    factors: &DMatrix<f64>,
    reg: &RegularizationParams,
) -> Result<FactorFit> {
    fit_factor_model_with(returns, factors, reg, SolverOptions::default())
}

pub fn fit_factor_model_with(
    returns: &DMatrix<f64>,
    factors: &DMatrix<f64>,
    reg: &RegularizationParams,
    opts: SolverOptions,
) -> Result<FactorFit> {
    let (m, n) = returns.shape();
    let j = factors.ncols();
    if factors.nrows() != m {
        return Err(Error::DimensionMismatch(format!(
            "{m} return rows vs {} factor rows",
            factors.nrows()
        )));
    }
    if m < j + 2 {
        return Err(Error::WindowTooShort {
            len: m,
            required: j + 2,
        });
    }

    let fits = (0..n)
        .into_par_iter()
        .map(|i| {
            let y = returns.column(i).into_owned();
            let fit = fit_elastic_net_with(factors, &y, reg, opts).map_err(|e| Error::AssetFit {
                asset: i,
                source: Box::new(e),
            })?;
            let fitted = factors * &fit.coef;
            let resid = DVector::from_fn(m, |t, _| y[t] - fit.intercept - fitted[t]);
            Ok((fit.intercept, fit.coef, sample_variance(&resid)))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut alpha = DVector::zeros(n);
    let mut beta = DMatrix::zeros(n, j);
    let mut resid_var = DVector::zeros(n);
    for (i, (a, b, v)) in fits.into_iter().enumerate() {
        alpha[i] = a;
        beta.row_mut(i).copy_from(&b.transpose());
        resid_var[i] = v;
    }
    Ok(FactorFit {
        alpha,
        beta,
        resid_var,
    })
}

/// Absolute views `q = α + β f` with `Ω = diag(σ²)` floored at
/// `opts.variance_floor`.
pub fn generate_views(fit: &FactorFit, f_current: &DVector<f64>, opts: &ViewOptions) -> Result<ViewSet> {
    let n = fit.n_assets();
    if f_current.len() != fit.n_factors() {
        return Err(Error::DimensionMismatch(format!(
            "{} factor values for {} loadings",
            f_current.len(),
            fit.n_factors()
        )));
    }
    if !all_finite_vec(f_current) {
        return Err(Error::NonFinite("current factor realization".into()));
    }
    let q_all = &fit.alpha + &fit.beta * f_current;

    let mut assets: Vec<usize> = (0..n).collect();
    if let Some(k) = opts.max_views {
        if k < n {
            assets.sort_by(|&a, &b| fit.resid_var[a].total_cmp(&fit.resid_var[b]).then(a.cmp(&b)));
            assets.truncate(k);
            assets.sort_unstable();
        }
    }
    let k = assets.len();
    let mut pick = DMatrix::zeros(k, n);
    let mut omega = DMatrix::zeros(k, k);
    let mut q = DVector::zeros(k);
    for (row, &a) in assets.iter().enumerate() {
        pick[(row, a)] = 1.0;
        q[row] = q_all[a];
        omega[(row, row)] = fit.resid_var[a].max(opts.variance_floor);
    }
    Ok(ViewSet { q, pick, omega })
}
