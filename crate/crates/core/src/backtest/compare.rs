use std::fmt::Write as _;

use rayon::prelude::*;

use super::{run_backtest, BacktestConfig, Metrics, Mode};
use crate::data::{FactorPanel, PricePanel};
use crate::error::Result;
use crate::fmt::{sig, REPORT_DIGITS};

#[derive(Debug, Clone, PartialEq)]
pub struct StrategyRow {
    pub mode: Mode,
    pub metrics: Metrics,
    pub total_fees: f64,
    pub final_value: f64,
    pub resize_events: usize,
}

/// Runs every [`Mode`] with otherwise identical settings, in [`Mode::ALL`]
/// order.
pub fn compare_strategies(cfg: &BacktestConfig, prices: &PricePanel, factors: &FactorPanel) -> Result<Vec<StrategyRow>> {
    Mode::ALL
        .par_iter()
        .map(|&mode| {
            let run = BacktestConfig { mode, ..cfg.clone() };
            let res = run_backtest(&run, prices, factors)?;
            Ok(StrategyRow {
                mode,
                metrics: res.metrics,
                total_fees: res.total_fees,
                final_value: *res.account_values.last().expect("at least one value"),
                resize_events: res.resize_events(),
            })
        })
        .collect()
}

pub fn summary_csv(rows: &[StrategyRow]) -> String {
    let mut out = String::from(
        "strategy,mean_excess_pct,vol_daily,sharpe_daily,sharpe_annualized,max_drawdown_pct,total_fees,final_value,resize_events\n",
    );
    for r in rows {
        let m = &r.metrics;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.mode.as_str(),
            sig(100.0 * m.mean_excess_daily, REPORT_DIGITS),
            sig(m.vol_daily, REPORT_DIGITS),
            sig(m.sharpe_daily, REPORT_DIGITS),
            sig(m.sharpe_annualized, REPORT_DIGITS),
            sig(100.0 * m.max_drawdown, REPORT_DIGITS),
            sig(r.total_fees, REPORT_DIGITS),
            sig(r.final_value, REPORT_DIGITS),
            r.resize_events,
        );
    }
    out
}
