use std::fmt::Write as _;

use super::BacktestResult;
use crate::fmt::{sig, REPORT_DIGITS};

/// `date,account_value,M,trigger`, one row per entry of `account_values`.
///
/// `M` and `trigger` are filled on the first day of each block and left
/// empty elsewhere.
pub fn trajectory_csv(res: &BacktestResult) -> String {
    let mut out = String::from("date,account_value,M,trigger\n");
    let mut events = res.window_history.iter().peekable();
    for (date, value) in res.dates.iter().zip(&res.account_values) {
        let _ = write!(out, "{},{}", date, sig(*value, REPORT_DIGITS));
        match events.peek() {
            Some(e) if e.date == *date => {
                let _ = writeln!(out, ",{},{}", e.m, e.trigger.as_str());
                events.next();
            }
            _ => out.push_str(",,\n"),
        }
    }
    out
}

pub fn window_history_csv(res: &BacktestResult) -> String {
    let mut out = String::from("date,M,trigger\n");
    for e in &res.window_history {
        let _ = writeln!(out, "{},{},{}", e.date, e.m, e.trigger.as_str());
    }
    out
}

pub fn metrics_csv(res: &BacktestResult) -> String {
    let m = &res.metrics;
    let rows: [(&str, f64); 8] = [
        ("mean_excess_daily", m.mean_excess_daily),
        ("vol_daily", m.vol_daily),
        ("sharpe_daily", m.sharpe_daily),
        ("sharpe_annualized", m.sharpe_annualized),
        ("max_drawdown", m.max_drawdown),
        ("total_fees", res.total_fees),
        ("final_value", *res.account_values.last().unwrap_or(&f64::NAN)),
        ("resize_events", res.resize_events() as f64),
    ];
    let mut out = String::from("metric,value\n");
    for (k, v) in rows {
        let _ = writeln!(out, "{k},{}", sig(v, REPORT_DIGITS));
    }
    out
}
