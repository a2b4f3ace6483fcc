//! Elastic-net regression by cyclic coordinate descent.
//!
//! The solver minimizes the unscaled objective
//!
//! ```text
//! ||y - Z θ||² + Σ_j ( l2_j θ_j² + l1_j |θ_j| )
//! ```
//!
//! using Gram-matrix ("covariance") updates. Per-coordinate penalty weights
//! let callers rescale columns without changing the problem being solved.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{all_finite, all_finite_vec};

/// Penalty mixing weights and overall magnitude.
///
/// `lambda1` and `lambda2` are mixing weights that must sum to one, or both be
/// zero to disable regularization. `strength` scales the combined penalty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegularizationParams {
    pub lambda1: f64,
    pub lambda2: f64,
    pub strength: f64,
    /// Whether the intercept is part of the penalized vector.
    pub penalize_intercept: bool,
}

impl Default for RegularizationParams {
    fn default() -> Self {
        Self {
            lambda1: 0.5,
            lambda2: 0.5,
            strength: 1.0,
            penalize_intercept: true,
        }
    }
}

impl RegularizationParams {
    /// No penalty at all (ordinary or weighted least squares).
    pub fn none() -> Self {
        Self {
            lambda1: 0.0,
            lambda2: 0.0,
            strength: 1.0,
            penalize_intercept: true,
        }
    }

    pub fn ridge(strength: f64) -> Self {
        Self {
            lambda1: 0.0,
            lambda2: 1.0,
            strength,
            penalize_intercept: true,
        }
    }

    pub fn lasso(strength: f64) -> Self {
        Self {
            lambda1: 1.0,
            lambda2: 0.0,
            strength,
            penalize_intercept: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |x: f64| x.is_finite() && x >= 0.0;
        if !ok(self.lambda1) || !ok(self.lambda2) || !ok(self.strength) {
            return Err(Error::InvalidParameter(
                "regularization weights must be finite and non-negative".into(),
            ));
        }
        let sum = self.lambda1 + self.lambda2;
        if sum != 0.0 && (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "lambda1 + lambda2 must be 0 or 1, got {sum}"
            )));
        }
        Ok(())
    }

    pub(crate) fn l1(&self) -> f64 {
        self.strength * self.lambda1
    }

    pub(crate) fn l2(&self) -> f64 {
        self.strength * self.lambda2
    }
}

/// Stopping rule for coordinate descent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Converged once no coefficient moves by more than this in a sweep.
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_sweeps: 10_000,
        }
    }
}

/// Raw coordinate-descent result.
#[derive(Debug, Clone)]
pub struct CdSolution {
    pub coef: DVector<f64>,
    pub sweeps: usize,
    /// Objective at the starting point followed by its value after each sweep.
    pub objective_trace: Vec<f64>,
}

#[inline]
fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

fn objective(z: &DMatrix<f64>, y: &DVector<f64>, theta: &DVector<f64>, l2: &[f64], l1: &[f64]) -> f64 {
    let mut pen = 0.0;
    for (j, &t) in theta.iter().enumerate() {
        pen += l2[j] * t * t + l1[j] * t.abs();
    }
    // residual form; the expanded Gram form cancels badly near the optimum
    (y - z * theta).norm_squared() + pen
}

/// Cyclic coordinate descent on `||y - Zθ||² + Σ l2_j θ_j² + l1_j |θ_j|`.
pub fn coordinate_descent(
    z: &DMatrix<f64>,
    y: &DVector<f64>,
    l2: &[f64],
    l1: &[f64],
    init: Option<&DVector<f64>>,
    opts: SolverOptions,
) -> Result<CdSolution> {
    let p = z.ncols();
    if z.nrows() != y.len() || l2.len() != p || l1.len() != p {
        return Err(Error::DimensionMismatch(format!(
            "design {}x{}, response {}, penalties {}/{}",
            z.nrows(),
            p,
            y.len(),
            l2.len(),
            l1.len()
        )));
    }
    if !all_finite(z) || !all_finite_vec(y) {
        return Err(Error::NonFinite("regression data".into()));
    }
    let gram = z.transpose() * z;
    let c = z.transpose() * y;

    let mut theta = match init {
        Some(t) if t.len() == p => t.clone(),
        Some(t) => {
            return Err(Error::DimensionMismatch(format!(
                "warm start has {} entries, expected {p}",
                t.len()
            )))
        }
        None => DVector::zeros(p),
    };
    let mut g = &gram * &theta;
    let mut trace = vec![objective(z, y, &theta, l2, l1)];

    for sweep in 1..=opts.max_sweeps {
        let mut max_change = 0.0_f64;
        for j in 0..p {
            let gjj = gram[(j, j)];
            let denom = gjj + l2[j];
            let old = theta[j];
            let new = if denom > 0.0 {
                let rho = c[j] - g[j] + gjj * old;
                soft_threshold(rho, 0.5 * l1[j]) / denom
            } else {
                0.0
            };
            let delta = new - old;
            if delta != 0.0 {
                theta[j] = new;
                g.axpy(delta, &gram.column(j), 1.0);
                max_change = max_change.max(delta.abs());
            }
        }
        // refresh to keep incremental drift out of the next sweep
        g = &gram * &theta;
        trace.push(objective(z, y, &theta, l2, l1));
        if max_change < opts.tol {
            if let Some(exact) = refine_on_support(&gram, &c, &theta, l2, l1) {
                let f = objective(z, y, &exact, l2, l1);
                let prev = *trace.last().expect("trace is non-empty");
                if f <= prev + 4.0 * f64::EPSILON * prev.abs() {
                    trace.push(f);
                    theta = exact;
                }
            }
            return Ok(CdSolution {
                coef: theta,
                sweeps: sweep,
                objective_trace: trace,
            });
        }
    }
    Err(Error::DidNotConverge {
        max_iters: opts.max_sweeps,
    })
}

/// Exact minimizer on the support and sign pattern of `theta`, returned only
/// when it satisfies the optimality conditions of the full problem.
fn refine_on_support(
    gram: &DMatrix<f64>,
    c: &DVector<f64>,
    theta: &DVector<f64>,
    l2: &[f64],
    l1: &[f64],
) -> Option<DVector<f64>> {
    let support: Vec<usize> = (0..theta.len()).filter(|&j| theta[j] != 0.0).collect();
    let s = support.len();
    let mut out = DVector::zeros(theta.len());
    if s > 0 {
        let a = DMatrix::from_fn(s, s, |i, k| {
            gram[(support[i], support[k])] + if i == k { l2[support[i]] } else { 0.0 }
        });
        let rhs = DVector::from_fn(s, |i, _| {
            let j = support[i];
            c[j] - 0.5 * l1[j] * theta[j].signum()
        });
        let sol = a.cholesky()?.solve(&rhs);
        for (i, &j) in support.iter().enumerate() {
            if sol[i] == 0.0 || sol[i].signum() != theta[j].signum() || !sol[i].is_finite() {
                return None;
            }
            out[j] = sol[i];
        }
    }
    let g = gram * &out;
    let scale = c.amax().max(1e-300);
    for j in 0..theta.len() {
        if out[j] == 0.0 && (c[j] - g[j]).abs() > 0.5 * l1[j] + 1e-10 * scale {
            return None;
        }
    }
    Some(out)
}

/// Fitted intercept and slopes, in the units of the original features.
#[derive(Debug, Clone)]
pub struct ElasticNetFit {
    pub intercept: f64,
    pub coef: DVector<f64>,
    pub sweeps: usize,
    pub objective_trace: Vec<f64>,
}

impl ElasticNetFit {
    /// Intercept followed by the slopes.
    pub fn to_vector(&self) -> DVector<f64> {
        let mut v = DVector::zeros(self.coef.len() + 1);
        v[0] = self.intercept;
        v.rows_mut(1, self.coef.len()).copy_from(&self.coef);
        v
    }
}

/// Fits `y ≈ α + Xβ` under the elastic-net penalty on `[α; β]`.
pub fn fit_elastic_net(x: &DMatrix<f64>, y: &DVector<f64>, reg: &RegularizationParams) -> Result<ElasticNetFit> {
    fit_elastic_net_with(x, y, reg, SolverOptions::default())
}

pub fn fit_elastic_net_with(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    reg: &RegularizationParams,
    opts: SolverOptions,
) -> Result<ElasticNetFit> {
    reg.validate()?;
    let (m, p) = x.shape();
    if m < 2 {
        return Err(Error::TooFewRows { rows: m, required: 2 });
    }
    if y.len() != m {
        return Err(Error::DimensionMismatch(format!("{m} rows of features, {} responses", y.len())));
    }
    if !all_finite(x) || !all_finite_vec(y) {
        return Err(Error::NonFinite("regression data".into()));
    }

    // Columns are scaled to unit root-mean-square; the penalty weights are
    // rescaled to match so the minimizer in natural units is unchanged.
    let scale: Vec<f64> = x
        .column_iter()
        .map(|col| {
            let s = (col.norm_squared() / m as f64).sqrt();
            if s > 0.0 {
                s
            } else {
                1.0
            }
        })
        .collect();
    let mut z = DMatrix::zeros(m, p + 1);
    z.column_mut(0).fill(1.0);
    for (j, s) in scale.iter().enumerate() {
        z.column_mut(j + 1).copy_from(&(x.column(j) / *s));
    }
    let mut l2 = Vec::with_capacity(p + 1);
    let mut l1 = Vec::with_capacity(p + 1);
    let w0 = if reg.penalize_intercept { 1.0 } else { 0.0 };
    l2.push(reg.l2() * w0);
    l1.push(reg.l1() * w0);
    for s in &scale {
        l2.push(reg.l2() / (s * s));
        l1.push(reg.l1() / s);
    }

    let sol = coordinate_descent(&z, y, &l2, &l1, None, opts)?;
    let coef = DVector::from_iterator(p, (0..p).map(|j| sol.coef[j + 1] / scale[j]));
    Ok(ElasticNetFit {
        intercept: sol.coef[0],
        coef,
        sweeps: sol.sweeps,
        objective_trace: sol.objective_trace,
    })
}
