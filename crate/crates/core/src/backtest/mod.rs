//! Rolling estimation and trading with a volatility-adaptive window.
//!
//! Each rebalance estimates on the `M` most recent rows, trades the resulting
//! weights once, and holds the share quantities for the next `M` days. After
//! a block the realized portfolio volatility is compared with the previous
//! block's to resize `M`. Fees are proportional to turnover and are charged
//! to cash at the rebalance.

mod compare;
pub mod metrics;
mod report;
pub mod window;

use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::black_litterman::{
    bl_elastic_net, ewma_covariance, implied_returns, posterior_covariance, sample_covariance, BlInputs, StackedSystem,
};
use crate::data::{align, compute_returns, FactorPanel, PricePanel};
use crate::elastic_net::RegularizationParams;
use crate::error::{Error, Result};
use crate::factor_model::{fit_factor_model, generate_views, ViewOptions};
use crate::linalg::column_means;
use crate::optimizer::{solve_mean_variance, MvConfig, PortfolioWeights};

pub use compare::{compare_strategies, summary_csv, StrategyRow};
pub use metrics::{compute_metrics, max_drawdown, Metrics};
pub use report::{metrics_csv, trajectory_csv, window_history_csv};
pub use window::{adjust_window, Trigger, WindowPolicy};

/// Strategy being simulated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Factor views, penalized posterior, EWMA covariance, adaptive window.
    DynamicBl,
    /// Window sample mean and covariance, adaptive window.
    DynamicMvNoBl,
    /// Window sample mean and covariance estimated once, then held.
    StaticMv,
    /// Equal weights bought once and held.
    MarketEqualWeight,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::MarketEqualWeight, Mode::StaticMv, Mode::DynamicMvNoBl, Mode::DynamicBl];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::DynamicBl => "dynamic_bl",
            Mode::DynamicMvNoBl => "dynamic_mv_no_bl",
            Mode::StaticMv => "static_mv",
            Mode::MarketEqualWeight => "market_equal_weight",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BacktestConfig {
    pub window: WindowPolicy,
    pub reg: RegularizationParams,
    /// EWMA decay.
    pub eta: f64,
    /// Prior uncertainty scale.
    pub tau: f64,
    pub mv: MvConfig,
    pub fee_rate: f64,
    pub initial_cash: f64,
    pub mode: Mode,
    /// Market weights for the equilibrium prior; equal weights when unset.
    pub market_weights: Option<DVector<f64>>,
    pub views: ViewOptions,
    /// Rebalance the equal-weight portfolio back to `1/n` every day instead
    /// of buying and holding.
    pub equal_weight_daily_rebalance: bool,
}

impl BacktestConfig {
    pub fn new(n_factors: usize, mode: Mode) -> Self {
        Self {
            window: WindowPolicy::for_factors(n_factors),
            reg: RegularizationParams::default(),
            eta: 0.94,
            tau: 0.025,
            mv: MvConfig::default(),
            fee_rate: 0.01,
            initial_cash: 1_000_000.0,
            mode,
            market_weights: None,
            views: ViewOptions::default(),
            equal_weight_daily_rebalance: false,
        }
    }

    pub fn validate(&self, n_assets: usize, n_factors: usize) -> Result<()> {
        self.window.validate(n_factors)?;
        self.reg.validate()?;
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(Error::InvalidParameter(format!("eta must lie in [0, 1], got {}", self.eta)));
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(Error::InvalidParameter(format!("tau must lie in (0, 1), got {}", self.tau)));
        }
        if !(0.0..1.0).contains(&self.fee_rate) {
            return Err(Error::InvalidParameter(format!("fee rate must lie in [0, 1), got {}", self.fee_rate)));
        }
        if !(self.initial_cash > 0.0 && self.initial_cash.is_finite()) {
            return Err(Error::InvalidParameter("initial cash must be positive".into()));
        }
        if let Some(w) = &self.market_weights {
            if w.len() != n_assets {
                return Err(Error::DimensionMismatch(format!(
                    "{} market weights for {n_assets} assets",
                    w.len()
                )));
            }
        }
        if self.mode != Mode::MarketEqualWeight {
            self.mv.validate(n_assets)?;
        }
        Ok(())
    }
}

/// One trading day.
#[derive(Debug, Clone, PartialEq)]
pub struct DailyRecord {
    pub date: NaiveDate,
    /// Value at the close of `date`.
    pub account_value: f64,
    /// Holdings as a fraction of the previous close's account value.
    pub exposures: DVector<f64>,
    /// `exposuresᵀ r`.
    pub gross_return: f64,
    /// Fee charged for a rebalance effective on this day.
    pub fee: f64,
    /// Window size in force.
    pub window: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowEvent {
    pub date: NaiveDate,
    pub m: usize,
    pub trigger: Trigger,
}

#[derive(Debug, Clone)]
pub struct BacktestResult {
    pub mode: Mode,
    pub tickers: Vec<String>,
    /// Dates of `account_values`; the first entry is the decision date
    /// preceding the first trade.
    pub dates: Vec<NaiveDate>,
    pub account_values: Vec<f64>,
    pub daily: Vec<DailyRecord>,
    /// Target weights, dated by the first day they are held.
    pub weight_history: Vec<(NaiveDate, PortfolioWeights)>,
    /// One entry per rebalance: the window used and what set it.
    pub window_history: Vec<WindowEvent>,
    pub metrics: Metrics,
    pub total_fees: f64,
    /// Risk-free rate on each trading day.
    pub rf: Vec<f64>,
}

impl BacktestResult {
    pub fn resize_events(&self) -> usize {
        self.window_history.iter().filter(|e| e.trigger != Trigger::Hold).count()
    }

    /// Net daily portfolio returns.
    pub fn portfolio_returns(&self) -> Vec<f64> {
        self.account_values.windows(2).map(|w| w[1] / w[0] - 1.0).collect()
    }
}

/// `fee_rate · Σ |new_i - prev_i|`.
pub fn apply_turnover_cost(prev: &DVector<f64>, new: &DVector<f64>, fee_rate: f64) -> Result<f64> {
    if prev.len() != new.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} previous vs {} new holdings",
            prev.len(),
            new.len()
        )));
    }
    if !(0.0..1.0).contains(&fee_rate) {
        return Err(Error::InvalidParameter(format!("fee rate must lie in [0, 1), got {fee_rate}")));
    }
    Ok(fee_rate * (new - prev).abs().sum())
}

/// Weights from one estimation window.
fn estimate(
    cfg: &BacktestConfig,
    returns: &DMatrix<f64>,
    factors: &DMatrix<f64>,
    w_mkt: &DVector<f64>,
) -> Result<PortfolioWeights> {
    let n = returns.ncols();
    match cfg.mode {
        Mode::MarketEqualWeight => Ok(PortfolioWeights::equal(n)),
        Mode::StaticMv | Mode::DynamicMvNoBl => {
            let mu = column_means(returns);
            let sigma = sample_covariance(returns)?;
            solve_mean_variance(&mu, &sigma, &cfg.mv)
        }
        Mode::DynamicBl => {
            let m = returns.nrows();
            let fit = fit_factor_model(returns, factors, &cfg.reg)?;
            let f_now = factors.row(m - 1).transpose();
            let views = generate_views(&fit, &f_now, &cfg.views)?;
            let sigma = sample_covariance(returns)?;
            let pi = implied_returns(&sigma, w_mkt, cfg.mv.rho)?;
            let inputs = BlInputs::new(pi, sigma, cfg.tau, views)?;
            let mu_hat = bl_elastic_net(&StackedSystem::from_inputs(&inputs), &cfg.reg)?;
            let sigma_hat = posterior_covariance(&inputs)?;
            let latest = returns.row(m - 1).transpose();
            let sigma_ewma = ewma_covariance(&sigma_hat, &latest, cfg.eta)?;
            solve_mean_variance(&mu_hat, &sigma_ewma, &cfg.mv)
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Schedule {
    Adaptive,
    Once,
    Daily,
}

/// Runs one strategy over `prices`, using `factors` for views and the
/// risk-free rate. Returns and factors are aligned on common dates first.
pub fn run_backtest(cfg: &BacktestConfig, prices: &PricePanel, factors: &FactorPanel) -> Result<BacktestResult> {
    let returns = compute_returns(prices)?;
    let (r, f) = align(&returns, factors)?;
    let n = r.n_assets();
    let big_n = r.len();
    cfg.validate(n, f.n_factors())?;
    let m_init = cfg.window.m_init;
    if big_n < m_init + 1 {
        return Err(Error::InsufficientData(format!(
            "{big_n} aligned return rows, need at least {}",
            m_init + 1
        )));
    }
    let w_mkt = cfg
        .market_weights
        .clone()
        .unwrap_or_else(|| DVector::from_element(n, 1.0 / n as f64));
    let schedule = match cfg.mode {
        Mode::DynamicBl | Mode::DynamicMvNoBl => Schedule::Adaptive,
        Mode::MarketEqualWeight if cfg.equal_weight_daily_rebalance => Schedule::Daily,
        Mode::StaticMv | Mode::MarketEqualWeight => Schedule::Once,
    };

    let mut holdings = DVector::zeros(n);
    let mut cash = cfg.initial_cash;
    let mut value = cfg.initial_cash;
    let mut dates = vec![r.dates[m_init - 1]];
    let mut values = vec![value];
    let mut daily = Vec::with_capacity(big_n - m_init);
    let mut weight_history = Vec::new();
    let mut window_history = Vec::new();
    let mut total_fees = 0.0;

    let mut t = m_init;
    let mut m = m_init;
    let mut trigger = Trigger::Hold;
    let mut prev_vol: Option<f64> = None;
    let mut weights = PortfolioWeights::equal(n);

    while t < big_n {
        let date = r.dates[t];
        if t == m_init || schedule != Schedule::Once {
            if t == m_init || schedule == Schedule::Adaptive {
                let len = m.min(t);
                let rows = r.returns.rows(t - len, len).into_owned();
                let frows = f.values.rows(t - len, len).into_owned();
                weights = estimate(cfg, &rows, &frows, &w_mkt).map_err(|e| e.at(r.dates[t - 1]))?;
            }
            let target = &weights.w * value;
            let fee = apply_turnover_cost(&holdings, &target, cfg.fee_rate)?;
            cash = value - target.sum() - fee;
            holdings = target;
            total_fees += fee;
            weight_history.push((date, weights.clone()));
            window_history.push(WindowEvent { date, m, trigger });
            // the fee is booked on the first day of the block
            daily.push(DailyRecord {
                date,
                account_value: 0.0,
                exposures: DVector::zeros(0),
                gross_return: 0.0,
                fee,
                window: m,
            });
        } else {
            daily.push(DailyRecord {
                date,
                account_value: 0.0,
                exposures: DVector::zeros(0),
                gross_return: 0.0,
                fee: 0.0,
                window: m,
            });
        }

        let block_end = match schedule {
            Schedule::Adaptive => (t + m).min(big_n),
            Schedule::Once => big_n,
            Schedule::Daily => t + 1,
        };
        let mut block_returns = Vec::with_capacity(block_end - t);
        for s in t..block_end {
            if s > t {
                daily.push(DailyRecord {
                    date: r.dates[s],
                    account_value: 0.0,
                    exposures: DVector::zeros(0),
                    gross_return: 0.0,
                    fee: 0.0,
                    window: m,
                });
            }
            let exposures = &holdings / value;
            let ret = r.returns.row(s).transpose();
            let gross = exposures.dot(&ret);
            holdings.component_mul_assign(&ret.add_scalar(1.0));
            value = holdings.sum() + cash;
            if !(value > 0.0) {
                return Err(Error::AccountDepleted(r.dates[s]));
            }
            let rec = daily.last_mut().expect("record pushed above");
            rec.account_value = value;
            rec.exposures = exposures;
            rec.gross_return = gross;
            dates.push(r.dates[s]);
            values.push(value);
            block_returns.push(gross);
        }

        if schedule == Schedule::Adaptive && block_end < big_n {
            let (_, vol) = metrics::mean_std(&block_returns);
            let (next, why) = match prev_vol {
                Some(prev) => adjust_window(vol, prev, &cfg.window, m),
                None => (m, Trigger::Hold),
            };
            prev_vol = Some(vol);
            m = next;
            trigger = why;
        }
        t = block_end;
    }

    let rf: Vec<f64> = (m_init..big_n).map(|s| f.rf[s]).collect();
    let net: Vec<f64> = values.windows(2).map(|w| w[1] / w[0] - 1.0).collect();
    let metrics = compute_metrics(&net, &rf, &values)?;
    Ok(BacktestResult {
        mode: cfg.mode,
        tickers: r.tickers.clone(),
        dates,
        account_values: values,
        daily,
        weight_history,
        window_history,
        metrics,
        total_fees,
        rf,
    })
}
