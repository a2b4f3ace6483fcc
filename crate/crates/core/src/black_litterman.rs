//! Posterior return and covariance estimates.
//!
//! Two routes produce the posterior mean: the classical closed form, and a
//! penalized weighted least-squares problem over the stacked system
//! `[Π; q] = [I; P] μ + ε`, `ε ~ N(0, blockdiag(τΣ, Ω))`, solved by whitening
//! and elastic-net coordinate descent. With zero penalty both agree.

use nalgebra::{DMatrix, DVector};

use crate::elastic_net::{coordinate_descent, RegularizationParams, SolverOptions};
use crate::error::{dims, Error, Result};
use crate::factor_model::ViewSet;
use crate::linalg::{
    all_finite, all_finite_vec, cholesky_lower, column_means, condition_number, require_square,
    solve_lower, sym_eigenvalues, symmetrize,
};

/// Largest condition number accepted before a solve is refused.
pub const CONDITION_LIMIT: f64 = 1e12;

/// Jitter added to a sample covariance that is not numerically positive
/// definite.
pub const COVARIANCE_JITTER: f64 = 1e-8;

/// Prior, views and confidence scaling for one estimation.
#[derive(Debug, Clone)]
pub struct BlInputs {
    pub pi: DVector<f64>,
    pub sigma: DMatrix<f64>,
    pub tau: f64,
    /// `τ Σ`, the uncertainty of the prior mean.
    pub q_mat: DMatrix<f64>,
    pub views: ViewSet,
}

impl BlInputs {
    pub fn new(pi: DVector<f64>, sigma: DMatrix<f64>, tau: f64, views: ViewSet) -> Result<Self> {
        let n = pi.len();
        require_square(&sigma, n, "sigma")?;
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::InvalidParameter(format!("tau must be positive, got {tau}")));
        }
        views.validate()?;
        if views.n_assets() != n {
            return Err(dims(format!("views on {} assets, prior on {n}", views.n_assets())));
        }
        if !all_finite(&sigma) || !all_finite_vec(&pi) || !all_finite_vec(&views.q) {
            return Err(Error::NonFinite("black-litterman inputs".into()));
        }
        let sigma = symmetrize(&sigma);
        let q_mat = &sigma * tau;
        Ok(Self {
            pi,
            sigma,
            tau,
            q_mat,
            views,
        })
    }

    pub fn n_assets(&self) -> usize {
        self.pi.len()
    }
}

/// `y = B μ + ε`, `ε ~ N(0, V)`.
#[derive(Debug, Clone)]
pub struct StackedSystem {
    pub y: DVector<f64>,
    /// `(n + K) x n`, identity on top of the pick matrix.
    pub b: DMatrix<f64>,
    /// Block-diagonal `[Q 0; 0 Ω]`.
    pub v: DMatrix<f64>,
}

impl StackedSystem {
    pub fn from_inputs(inputs: &BlInputs) -> Self {
        let n = inputs.n_assets();
        let k = inputs.views.len();
        let mut y = DVector::zeros(n + k);
        y.rows_mut(0, n).copy_from(&inputs.pi);
        y.rows_mut(n, k).copy_from(&inputs.views.q);
        let mut b = DMatrix::zeros(n + k, n);
        b.view_mut((0, 0), (n, n)).fill_with_identity();
        b.view_mut((n, 0), (k, n)).copy_from(&inputs.views.pick);
        let mut v = DMatrix::zeros(n + k, n + k);
        v.view_mut((0, 0), (n, n)).copy_from(&inputs.q_mat);
        v.view_mut((n, n), (k, k)).copy_from(&inputs.views.omega);
        Self { y, b, v }
    }

    pub fn n_assets(&self) -> usize {
        self.b.ncols()
    }

    /// Lower factor `L` with `L Lᵀ = V`, factoring the two diagonal blocks
    /// separately when the off-diagonal blocks vanish.
    fn whitening_factor(&self) -> Result<DMatrix<f64>> {
        let n = self.n_assets();
        let total = self.v.nrows();
        let k = total - n;
        let off_zero = self.v.view((n, 0), (k, n)).iter().all(|&x| x == 0.0)
            && self.v.view((0, n), (n, k)).iter().all(|&x| x == 0.0);
        if !off_zero {
            return cholesky_lower(&self.v, "V");
        }
        let mut l = DMatrix::zeros(total, total);
        let lq = cholesky_lower(&self.v.view((0, 0), (n, n)).into_owned(), "Q")?;
        l.view_mut((0, 0), (n, n)).copy_from(&lq);
        if k > 0 {
            let lo = cholesky_lower(&self.v.view((n, n), (k, k)).into_owned(), "Omega")?;
            l.view_mut((n, n), (k, k)).copy_from(&lo);
        }
        Ok(l)
    }
}

/// Posterior mean and covariance.
#[derive(Debug, Clone)]
pub struct BlEstimate {
    pub mu_hat: DVector<f64>,
    pub sigma_hat: DMatrix<f64>,
}

/// Equilibrium returns `Π = 2ρ Σ w_mkt`, the returns under which `w_mkt`
/// is the unconstrained maximizer of `μᵀw - ρ wᵀΣw`.
pub fn implied_returns(sigma: &DMatrix<f64>, w_mkt: &DVector<f64>, rho: f64) -> Result<DVector<f64>> {
    require_square(sigma, w_mkt.len(), "sigma")?;
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::InvalidParameter(format!("rho must be positive, got {rho}")));
    }
    if (w_mkt.sum() - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidParameter(format!(
            "market weights sum to {}, expected 1",
            w_mkt.sum()
        )));
    }
    Ok(sigma * w_mkt * (2.0 * rho))
}

/// Factors `P Q Pᵀ + Ω` after checking its conditioning.
fn view_system(inputs: &BlInputs) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let p = &inputs.views.pick;
    let q_pt = &inputs.q_mat * p.transpose();
    let s = symmetrize(&(p * &q_pt + &inputs.views.omega));
    let cond = condition_number(&s);
    if !(cond <= CONDITION_LIMIT) {
        return Err(Error::SingularMatrix { cond });
    }
    Ok((q_pt, cholesky_lower(&s, "P Q P' + Omega")?))
}

/// `Σ + (Q⁻¹ + PᵀΩ⁻¹P)⁻¹`, evaluated as `Σ + Q - QPᵀ(PQPᵀ + Ω)⁻¹PQ` so that
/// `Q` itself is never inverted.
pub fn posterior_covariance(inputs: &BlInputs) -> Result<DMatrix<f64>> {
    if inputs.views.is_empty() {
        return Ok(&inputs.sigma + &inputs.q_mat);
    }
    let (q_pt, l) = view_system(inputs)?;
    let half = solve_lower(&l, &q_pt.transpose())?;
    let correction = &inputs.q_mat - half.transpose() * &half;
    Ok(&inputs.sigma + symmetrize(&correction))
}

/// Closed-form posterior mean and covariance.
pub fn bl_closed_form(inputs: &BlInputs) -> Result<BlEstimate> {
    if inputs.views.is_empty() {
        return Ok(BlEstimate {
            mu_hat: inputs.pi.clone(),
            sigma_hat: &inputs.sigma + &inputs.q_mat,
        });
    }
    let (q_pt, l) = view_system(inputs)?;
    let gap = &inputs.views.q - &inputs.views.pick * &inputs.pi;
    let chol = nalgebra::Cholesky::pack_dirty(l.clone());
    let mu_hat = &inputs.pi + &q_pt * chol.solve(&gap);
    let half = solve_lower(&l, &q_pt.transpose())?;
    let correction = &inputs.q_mat - half.transpose() * &half;
    Ok(BlEstimate {
        mu_hat,
        sigma_hat: &inputs.sigma + symmetrize(&correction),
    })
}

/// Penalized weighted least squares:
/// `min (y - Bμ)ᵀ V⁻¹ (y - Bμ) + s (λ2 ||μ||² + λ1 ||μ||₁)`.
pub fn bl_elastic_net(sys: &StackedSystem, reg: &RegularizationParams) -> Result<DVector<f64>> {
    bl_elastic_net_with(sys, reg, SolverOptions::default())
}

pub fn bl_elastic_net_with(
    sys: &StackedSystem,
    reg: &RegularizationParams,
    opts: SolverOptions,
) -> Result<DVector<f64>> {
    reg.validate()?;
    let n = sys.n_assets();
    let total = sys.y.len();
    if sys.b.nrows() != total || sys.v.shape() != (total, total) || total < n {
        return Err(dims(format!(
            "stacked system with y {total}, B {}x{}, V {}x{}",
            sys.b.nrows(),
            n,
            sys.v.nrows(),
            sys.v.ncols()
        )));
    }
    let l = sys.whitening_factor()?;
    let y_w = solve_lower(&l, &DMatrix::from_column_slice(total, 1, sys.y.as_slice()))?.column(0).into_owned();
    let b_w = solve_lower(&l, &sys.b)?;
    let l2 = vec![reg.l2(); n];
    let l1 = vec![reg.l1(); n];
    // start from the prior mean
    let start = sys.y.rows(0, n).into_owned();
    Ok(coordinate_descent(&b_w, &y_w, &l2, &l1, Some(&start), opts)?.coef)
}

/// `η Σ̂ + (1 - η) r rᵀ`.
pub fn ewma_covariance(sigma_hat: &DMatrix<f64>, r: &DVector<f64>, eta: f64) -> Result<DMatrix<f64>> {
    require_square(sigma_hat, r.len(), "sigma_hat")?;
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::InvalidParameter(format!("eta must lie in [0, 1], got {eta}")));
    }
    Ok(sigma_hat * eta + (r * r.transpose()) * (1.0 - eta))
}

/// Unbiased covariance of the rows of `window` (`M x n`, observations in
/// rows). A jitter of [`COVARIANCE_JITTER`] is added on the diagonal when the
/// result is not numerically positive definite.
pub fn sample_covariance(window: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (m, n) = window.shape();
    if m < 2 {
        return Err(Error::WindowTooShort { len: m, required: 2 });
    }
    let mean = column_means(window);
    let centered = DMatrix::from_fn(m, n, |t, i| window[(t, i)] - mean[i]);
    let mut cov = symmetrize(&(centered.transpose() * &centered / (m as f64 - 1.0)));
    let ev = sym_eigenvalues(&cov);
    let lo = ev.first().copied().unwrap_or(0.0);
    let hi = ev.last().copied().unwrap_or(0.0).max(0.0);
    if lo <= n as f64 * f64::EPSILON * hi {
        for i in 0..n {
            cov[(i, i)] += COVARIANCE_JITTER;
        }
    }
    Ok(cov)
}
