mod common;

use common::{gbm_panel, rng, start_date};
use dynbl::backtest::max_drawdown;
use dynbl::data::PricePanel;
use dynbl::simulate::{flip_prices, simulate_gbm, simulate_path, weekday_dates, GbmParams};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;

fn random_panel(seed: u64, rows: usize, n: usize) -> PricePanel {
    let mut r = rng(seed);
    let prices = DMatrix::from_fn(rows, n, |_, _| r.random_range(1.0..500.0));
    let tickers = (0..n).map(|j| format!("T{j}")).collect();
    PricePanel::new(weekday_dates(start_date(), rows), tickers, prices).unwrap()
}

#[test]
fn log_return_moments_match_parameters() {
    let (mu, sigma) = (0.05, 0.3);
    let mut p = GbmParams::new(vec!["X".into()], DVector::from_element(1, mu), DVector::from_element(1, sigma));
    p.n_paths = 2_000;
    p.horizon_steps = 252;
    p.seed = 17;
    let paths = simulate_gbm(&p).unwrap();
    let mut steps = Vec::new();
    let mut terminal = Vec::new();
    for panel in &paths {
        let col = panel.prices.column(0);
        terminal.push((col[252] / col[0]).ln());
        steps.extend((1..=252).map(|t| (col[t] / col[t - 1]).ln()));
    }
    let mean = terminal.iter().sum::<f64>() / terminal.len() as f64;
    let se = sigma / (terminal.len() as f64).sqrt();
    assert!((mean - (mu - 0.5 * sigma * sigma)).abs() < 4.0 * se);
    let m = steps.iter().sum::<f64>() / steps.len() as f64;
    let var = steps.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (steps.len() - 1) as f64;
    assert!((var / (sigma * sigma / 252.0) - 1.0).abs() < 0.05);
}

#[test]
fn correlated_shocks_are_reproducible() {
    let mut p = GbmParams::new(
        vec!["X".into(), "Y".into()],
        DVector::from_element(2, 0.0),
        DVector::from_element(2, 0.2),
    );
    p.correlation = Some(DMatrix::from_row_slice(2, 2, &[1.0, 0.8, 0.8, 1.0]));
    p.n_paths = 400;
    let paths = simulate_gbm(&p).unwrap();
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for panel in &paths {
        for t in 1..=p.horizon_steps {
            xs.push((panel.prices[(t, 0)] / panel.prices[(t - 1, 0)]).ln());
            ys.push((panel.prices[(t, 1)] / panel.prices[(t - 1, 1)]).ln());
        }
    }
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let cov = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>();
    let vx = xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    let vy = ys.iter().map(|y| (y - my).powi(2)).sum::<f64>();
    assert!((cov / (vx * vy).sqrt() - 0.8).abs() < 0.02);
    assert_eq!(simulate_path(&p, 11).unwrap(), paths[11]);
}

#[test]
fn prices_are_positive() {
    let p = gbm_panel(5, 2000, 3);
    assert!(p.prices.iter().all(|x| *x > 0.0));
}

#[test]
fn flipping_a_rising_series_creates_a_drawdown() {
    let rows = 30;
    let prices = DMatrix::from_fn(rows, 1, |t, _| 100.0 * 1.01f64.powi(t as i32));
    let p = PricePanel::new(weekday_dates(start_date(), rows), vec!["U".into()], prices).unwrap();
    let series = |p: &PricePanel| p.prices.column(0).iter().copied().collect::<Vec<_>>();
    assert_eq!(max_drawdown(&series(&p)), 0.0);
    assert!(max_drawdown(&series(&flip_prices(&p))) > 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn flip_is_an_involution(seed in any::<u64>(), rows in 1usize..60, n in 1usize..6) {
        let p = random_panel(seed, rows, n);
        prop_assert_eq!(flip_prices(&flip_prices(&p)), p);
    }

    #[test]
    fn flip_preserves_each_series_multiset(seed in any::<u64>(), rows in 1usize..60) {
        let p = random_panel(seed, rows, 3);
        let f = flip_prices(&p);
        prop_assert_eq!(&f.dates, &p.dates);
        for j in 0..3 {
            let mut a: Vec<f64> = p.prices.column(j).iter().copied().collect();
            let mut b: Vec<f64> = f.prices.column(j).iter().copied().collect();
            a.sort_by(f64::total_cmp);
            b.sort_by(f64::total_cmp);
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn drawdown_stays_in_unit_interval(values in prop::collection::vec(1e-6f64..1e6, 1..200)) {
        let d = max_drawdown(&values);
        prop_assert!((0.0..=1.0).contains(&d));
    }

    #[test]
    fn nondecreasing_series_has_no_drawdown(steps in prop::collection::vec(0.0f64..10.0, 1..200)) {
        let values: Vec<f64> = steps.iter().scan(1.0, |acc, s| { *acc += s; Some(*acc) }).collect();
        prop_assert_eq!(max_drawdown(&values), 0.0);
    }
}
