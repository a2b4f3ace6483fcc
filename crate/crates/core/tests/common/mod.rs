#![allow(dead_code)]

use chrono::NaiveDate;
use dynbl::data::{FactorModel, FactorPanel, PricePanel};
use dynbl::simulate::{simulate_path, weekday_dates, GbmParams};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
}

pub fn normal_vector(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

/// Positive definite with eigenvalues bounded away from zero, scaled by `scale`.
pub fn random_spd(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> DMatrix<f64> {
    let g = normal_matrix(rng, n, n + 2);
    let a = &g * g.transpose() / (n + 2) as f64 + DMatrix::identity(n, n) * 0.2;
    a * scale
}

pub fn max_abs(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).abs().max()
}

pub fn max_abs_mat(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).abs().max()
}

pub fn start_date() -> NaiveDate {
    NaiveDate::from_ymd_opt(2021, 1, 4).unwrap()
}

/// `days + 1` rows of independent GBM prices.
pub fn gbm_panel(n: usize, days: usize, seed: u64) -> PricePanel {
    let tickers = (0..n).map(|i| format!("A{i}")).collect();
    let mut p = GbmParams::new(
        tickers,
        DVector::from_fn(n, |i, _| 0.02 * (i as f64 - 1.0)),
        DVector::from_fn(n, |i, _| 0.15 + 0.05 * i as f64),
    );
    p.horizon_steps = days;
    p.seed = seed;
    p.start_date = start_date();
    simulate_path(&p, 0).unwrap()
}

/// Gaussian daily factor returns on `dates` with a small constant risk-free rate.
pub fn factor_panel(dates: &[NaiveDate], model: FactorModel, seed: u64) -> FactorPanel {
    let mut r = rng(seed);
    let j = model.n_factors();
    FactorPanel {
        dates: dates.to_vec(),
        model,
        factor_names: model.factor_names().iter().map(|s| s.to_string()).collect(),
        values: normal_matrix(&mut r, dates.len(), j) * 0.008,
        rf: DVector::from_element(dates.len(), 0.0001),
    }
}

pub fn constant_panel(n: usize, rows: usize) -> PricePanel {
    let dates = weekday_dates(start_date(), rows);
    let tickers = (0..n).map(|i| format!("C{i}")).collect();
    PricePanel::new(dates, tickers, DMatrix::from_element(rows, n, 50.0)).unwrap()
}
