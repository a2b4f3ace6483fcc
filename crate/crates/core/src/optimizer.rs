//! Box-constrained mean-variance allocation.
//!
//! Maximizes `μᵀw - ρ wᵀΣw` subject to `Σ w_i = 1` and `-W <= w_i <= W`.
//! The primary solver is a primal active-set method on the bound
//! constraints; a projected-gradient loop with an exact projection onto the
//! budget-and-box set takes over if the active set stalls.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{all_finite, all_finite_vec, require_square, symmetrize};

const PSD_JITTER: f64 = 1e-10;
const MAX_ITERS: usize = 50_000;
const BOUND_TOL: f64 = 1e-9;

/// Risk aversion and per-asset bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MvConfig {
    pub rho: f64,
    /// Bound `W` on every `|w_i|`.
    pub box_bound: f64,
}

impl Default for MvConfig {
    fn default() -> Self {
        Self {
            rho: 2.5,
            box_bound: 0.1,
        }
    }
}

impl MvConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(Error::InvalidParameter(format!("rho must be positive, got {}", self.rho)));
        }
        if !(self.box_bound > 0.0 && self.box_bound <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "box bound must lie in (0, 1], got {}",
                self.box_bound
            )));
        }
        if (n as f64) * self.box_bound < 1.0 - 1e-12 {
            return Err(Error::Infeasible {
                n,
                bound: self.box_bound,
            });
        }
        Ok(())
    }

    /// Soft checks that do not block a solve.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(1.0..=10.0).contains(&self.rho) {
            out.push(format!("risk aversion {} is outside the usual [1, 10] range", self.rho));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PortfolioWeights {
    pub w: DVector<f64>,
}

impl PortfolioWeights {
    pub fn equal(n: usize) -> Self {
        Self {
            w: DVector::from_element(n, 1.0 / n as f64),
        }
    }

    pub fn is_feasible(&self, cfg: &MvConfig) -> bool {
        (self.w.sum() - 1.0).abs() <= 1e-8 && self.w.iter().all(|x| x.abs() <= cfg.box_bound + 1e-10)
    }
}

/// `μᵀw - ρ wᵀΣw`.
pub fn mv_objective(w: &DVector<f64>, mu: &DVector<f64>, sigma: &DMatrix<f64>, rho: f64) -> f64 {
    mu.dot(w) - rho * w.dot(&(sigma * w))
}

/// Symmetrizes; a matrix that is not numerically positive definite has its
/// negative eigenvalues clipped to zero and a small jitter added.
fn repair_psd(sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let s = symmetrize(sigma);
    let n = s.nrows();
    let eig = s.clone().symmetric_eigen();
    let lo = eig.eigenvalues.min();
    let hi = eig.eigenvalues.amax();
    if lo < -1e-8 * hi.max(f64::MIN_POSITIVE) {
        return Err(Error::NotPsd { min_eig: lo });
    }
    if lo > n as f64 * f64::EPSILON * hi {
        return Ok(s);
    }
    let clipped = eig.eigenvalues.map(|x| x.max(0.0));
    let mut out = symmetrize(&(&eig.eigenvectors * DMatrix::from_diagonal(&clipped) * eig.eigenvectors.transpose()));
    for i in 0..n {
        out[(i, i)] += PSD_JITTER;
    }
    Ok(out)
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Bound {
    Free,
    Lower,
    Upper,
}

/// Solves the allocation problem; the result is feasible and satisfies the
/// KKT conditions.
pub fn solve_mean_variance(mu: &DVector<f64>, sigma: &DMatrix<f64>, cfg: &MvConfig) -> Result<PortfolioWeights> {
    let n = mu.len();
    require_square(sigma, n, "sigma")?;
    cfg.validate(n)?;
    if !all_finite_vec(mu) || !all_finite(sigma) {
        return Err(Error::NonFinite("mean-variance inputs".into()));
    }
    let b = cfg.box_bound;
    if ((n as f64) * b - 1.0).abs() <= 1e-12 {
        // the box pins every weight
        return Ok(PortfolioWeights::equal(n));
    }
    let hess = repair_psd(sigma)? * (2.0 * cfg.rho);

    let w = match active_set(mu, &hess, b) {
        Some(w) => w,
        None => projected_gradient(mu, &hess, b)?,
    };
    let w = w.map(|x| x.clamp(-b, b));
    let out = PortfolioWeights { w };
    if !out.is_feasible(cfg) {
        return Err(Error::DidNotConverge { max_iters: MAX_ITERS });
    }
    Ok(out)
}

/// Primal active-set on the bound constraints; the budget is always active.
/// Returns `None` when the equality-constrained subproblem is singular or the
/// iteration cap is hit.
fn active_set(mu: &DVector<f64>, hess: &DMatrix<f64>, b: f64) -> Option<DVector<f64>> {
    let n = mu.len();
    let mut w = DVector::from_element(n, 1.0 / n as f64);
    let mut state = vec![Bound::Free; n];
    let mult_tol = 1e-12 * (1.0 + mu.amax() + hess.amax());

    for _ in 0..MAX_ITERS {
        let free: Vec<usize> = (0..n).filter(|&i| state[i] == Bound::Free).collect();
        let grad = hess * &w - mu;
        let nf = free.len();

        // [H_FF 1; 1ᵀ 0] [p; λ] = [-g_F; 0]
        let (step, lambda) = if nf == 0 {
            (Vec::new(), f64::NAN)
        } else {
            let mut kkt = DMatrix::zeros(nf + 1, nf + 1);
            let mut rhs = DVector::zeros(nf + 1);
            for (a, &i) in free.iter().enumerate() {
                for (c, &j) in free.iter().enumerate() {
                    kkt[(a, c)] = hess[(i, j)];
                }
                kkt[(a, nf)] = 1.0;
                kkt[(nf, a)] = 1.0;
                rhs[a] = -grad[i];
            }
            let sol = kkt.lu().solve(&rhs)?;
            if !all_finite_vec(&sol) {
                return None;
            }
            (sol.rows(0, nf).iter().copied().collect(), sol[nf])
        };

        let step_norm = step.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        if step_norm <= 1e-12 {
            // stationary on the current face: check bound multipliers
            if lambda.is_nan() {
                return None;
            }
            let mut worst: Option<(usize, f64)> = None;
            for i in 0..n {
                let m = match state[i] {
                    Bound::Free => continue,
                    Bound::Upper => -(grad[i] + lambda),
                    Bound::Lower => grad[i] + lambda,
                };
                if m < -mult_tol && worst.is_none_or(|(_, v)| m < v) {
                    worst = Some((i, m));
                }
            }
            match worst {
                None => return Some(w),
                Some((i, _)) => state[i] = Bound::Free,
            }
            continue;
        }

        let mut alpha = 1.0;
        let mut blocking: Option<(usize, Bound)> = None;
        for (a, &i) in free.iter().enumerate() {
            let p = step[a];
            let (room, side) = if p > 0.0 {
                ((b - w[i]) / p, Bound::Upper)
            } else if p < 0.0 {
                ((-b - w[i]) / p, Bound::Lower)
            } else {
                continue;
            };
            if room < alpha {
                alpha = room.max(0.0);
                blocking = Some((i, side));
            }
        }
        for (a, &i) in free.iter().enumerate() {
            w[i] += alpha * step[a];
        }
        if let Some((i, side)) = blocking {
            w[i] = if side == Bound::Upper { b } else { -b };
            state[i] = side;
        }
    }
    None
}

/// Euclidean projection onto `{Σ x = 1, -b <= x_i <= b}` by bisection on
/// the shift `θ` in `x_i = clamp(v_i - θ, -b, b)`.
pub(crate) fn project_budget_box(v: &DVector<f64>, b: f64) -> DVector<f64> {
    let total = |theta: f64| v.iter().map(|x| (x - theta).clamp(-b, b)).sum::<f64>();
    let mut lo = v.min() - b;
    let mut hi = v.max() + b;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if total(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let theta = 0.5 * (lo + hi);
    let mut x = v.map(|x| (x - theta).clamp(-b, b));
    // spread the leftover rounding over coordinates strictly inside the box
    let interior: Vec<usize> = (0..x.len()).filter(|&i| x[i].abs() < b).collect();
    if !interior.is_empty() {
        let gap = (1.0 - x.sum()) / interior.len() as f64;
        for i in interior {
            x[i] = (x[i] + gap).clamp(-b, b);
        }
    }
    x
}

fn projected_gradient(mu: &DVector<f64>, hess: &DMatrix<f64>, b: f64) -> Result<DVector<f64>> {
    let n = mu.len();
    let lip = hess.clone().symmetric_eigenvalues().max().max(f64::MIN_POSITIVE);
    let mut w = DVector::from_element(n, 1.0 / n as f64);
    for _ in 0..MAX_ITERS {
        let grad = hess * &w - mu;
        let next = project_budget_box(&(&w - grad / lip), b);
        let change = (&next - &w).amax();
        w = next;
        if change < 1e-12 {
            return Ok(w);
        }
    }
    Err(Error::DidNotConverge { max_iters: MAX_ITERS })
}

/// Max-norm of the KKT stationarity residual at a feasible `w`, with the
/// budget multiplier fitted by least squares over the free coordinates and
/// sign violations of the bound multipliers counted as residual.
pub fn kkt_residual(w: &PortfolioWeights, mu: &DVector<f64>, sigma: &DMatrix<f64>, cfg: &MvConfig) -> f64 {
    let b = cfg.box_bound;
    let w = &w.w;
    let grad = mu - symmetrize(sigma) * w * (2.0 * cfg.rho);
    let mut free = Vec::new();
    let mut upper = Vec::new();
    let mut lower = Vec::new();
    for (i, &x) in w.iter().enumerate() {
        if (x - b).abs() <= BOUND_TOL {
            upper.push(grad[i]);
        } else if (x + b).abs() <= BOUND_TOL {
            lower.push(grad[i]);
        } else {
            free.push(grad[i]);
        }
    }
    let nu = if !free.is_empty() {
        free.iter().sum::<f64>() / free.len() as f64
    } else {
        // any ν in [max lower, min upper] is admissible; take the midpoint
        let lo = lower.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let hi = upper.iter().copied().fold(f64::INFINITY, f64::min);
        match (lo.is_finite(), hi.is_finite()) {
            (true, true) => 0.5 * (lo + hi),
            (true, false) => lo,
            (false, true) => hi,
            (false, false) => 0.0,
        }
    };
    let mut r = 0.0_f64;
    for g in free {
        r = r.max((g - nu).abs());
    }
    for g in upper {
        r = r.max(nu - g);
    }
    for g in lower {
        r = r.max(g - nu);
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(rho: f64, b: f64) -> MvConfig {
        MvConfig { rho, box_bound: b }
    }

    #[test]
    fn identical_assets_get_equal_weights() {
        let sigma = DMatrix::identity(5, 5) * 0.04;
        let mu = DVector::from_element(5, 0.01);
        let w = solve_mean_variance(&mu, &sigma, &cfg(2.5, 0.3)).unwrap();
        assert!(w.w.iter().all(|&x| (x - 0.2).abs() < 1e-12));
    }

    #[test]
    fn two_asset_interior_solution() {
        // equality-constrained closed form: w = (2ρΣ)⁻¹(μ + ν1) with ν = 0.025
        let mu = DVector::from_vec(vec![0.10, 0.05]);
        let sigma = DMatrix::identity(2, 2) * 0.04;
        let c = cfg(2.5, 1.0);
        let w = solve_mean_variance(&mu, &sigma, &c).unwrap();
        assert!((w.w[0] - 0.625).abs() < 1e-8);
        assert!((w.w[1] - 0.375).abs() < 1e-8);
        assert!(kkt_residual(&w, &mu, &sigma, &c) < 1e-6);
        assert!(kkt_residual(&PortfolioWeights::equal(2), &mu, &sigma, &c) > 1e-3);
    }

    #[test]
    fn infeasible_box() {
        let r = solve_mean_variance(&DVector::zeros(3), &DMatrix::identity(3, 3), &cfg(2.5, 0.3));
        assert!(matches!(r, Err(Error::Infeasible { n: 3, .. })));
    }

    #[test]
    fn indefinite_covariance_is_rejected() {
        let sigma = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let r = solve_mean_variance(&DVector::zeros(2), &sigma, &cfg(2.5, 1.0));
        assert!(matches!(r, Err(Error::NotPsd { .. })));
    }

    #[test]
    fn pinned_box_returns_equal_weights() {
        let w = solve_mean_variance(&DVector::from_vec(vec![0.3, 0.0, -0.1, 0.2]), &DMatrix::identity(4, 4), &cfg(1.0, 0.25)).unwrap();
        assert_eq!(w, PortfolioWeights::equal(4));
    }

    #[test]
    fn bounds_bind_when_one_asset_dominates() {
        let mu = DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0]);
        let sigma = DMatrix::identity(4, 4) * 0.01;
        let c = cfg(1.0, 0.4);
        let w = solve_mean_variance(&mu, &sigma, &c).unwrap();
        assert!((w.w[0] - 0.4).abs() < 1e-12);
        for i in 1..4 {
            assert!((w.w[i] - 0.2).abs() < 1e-10);
        }
        assert!(kkt_residual(&w, &mu, &sigma, &c) < 1e-9);
    }

    #[test]
    fn projection_lands_in_the_set() {
        let v = DVector::from_vec(vec![3.0, -2.0, 0.4, 0.1, 0.0]);
        let x = project_budget_box(&v, 0.5);
        assert!((x.sum() - 1.0).abs() < 1e-12);
        assert!(x.iter().all(|a| a.abs() <= 0.5));
    }

    #[test]
    fn fallback_matches_active_set() {
        let mu = DVector::from_vec(vec![0.08, 0.02, -0.03, 0.05]);
        let sigma = DMatrix::from_row_slice(4, 4, &[
            0.04, 0.01, 0.0, 0.002,
            0.01, 0.03, 0.004, 0.0,
            0.0, 0.004, 0.05, 0.01,
            0.002, 0.0, 0.01, 0.02,
        ]);
        let hess = repair_psd(&sigma).unwrap() * 5.0;
        let a = active_set(&mu, &hess, 0.35).unwrap();
        let p = projected_gradient(&mu, &hess, 0.35).unwrap();
        assert!((a - p).amax() < 1e-8);
    }
}
