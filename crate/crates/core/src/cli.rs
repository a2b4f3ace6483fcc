//! Command-line front end.
//!
//! Exit codes: 0 success, 1 configuration error, 2 data error, 3 numerical
//! failure. Every numeric output uses 10 significant digits, except price
//! panels, which keep 15 so they read back exactly.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use crate::backtest::{
    compare_strategies, compute_metrics, metrics_csv, run_backtest, summary_csv, trajectory_csv, window_history_csv,
    BacktestConfig, BacktestResult, Mode, WindowPolicy,
};
use crate::data::{load_factor_csv, load_price_csv, load_weights_csv, FactorModel, FactorPanel, PricePanel};
use crate::elastic_net::RegularizationParams;
use crate::error::{Error, ErrorKind, Result};
use crate::factor_model::ViewOptions;
use crate::fmt::{sig, write_atomic, REPORT_DIGITS};
use crate::optimizer::MvConfig;
use crate::simulate::{flip_prices, load_gbm_params_csv, simulate_path};

#[derive(Debug, Parser)]
#[command(name = "dynbl", version, about = "Dynamic Black-Litterman portfolio backtester")]
pub struct Cli {
    /// Run configuration (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file or directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Random seed for simulation.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one strategy and write trajectory, metrics and window history.
    Backtest(RunArgs),
    /// Run all four strategies and write a summary table.
    Compare(RunArgs),
    /// Generate GBM price panels from a parameter file.
    Simulate(SimulateArgs),
    /// Reverse every price series in time.
    Flip {
        /// Input price CSV.
        prices: PathBuf,
    },
    /// Performance metrics of a trajectory or of each series in a price panel.
    Metrics(MetricsArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Override the configured fee rate.
    #[arg(long)]
    pub fee_rate: Option<f64>,
    /// Override the configured strategy (backtest only).
    #[arg(long, value_parser = parse_mode)]
    pub mode: Option<Mode>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// `ticker,drift,vol[,s0]` parameter CSV.
    #[arg(long)]
    pub params: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub paths: usize,
    #[arg(long, default_value_t = 252)]
    pub steps: usize,
    /// Keep only the first N tickers of the parameter file.
    #[arg(long)]
    pub assets: Option<usize>,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    /// Trajectory CSV (with an `account_value` column) or price CSV.
    pub input: PathBuf,
    /// Factor CSV supplying the risk-free rate; zero when absent.
    #[arg(long, requires = "factor_model")]
    pub factors: Option<PathBuf>,
    #[arg(long, value_parser = parse_model)]
    pub factor_model: Option<FactorModel>,
}

fn parse_mode(s: &str) -> std::result::Result<Mode, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

fn parse_model(s: &str) -> std::result::Result<FactorModel, String> {
    s.parse::<FactorModel>().map_err(|e| e.to_string())
}

/// Window settings; unset fields take the defaults for the factor model.
#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowSpec {
    pub m_init: Option<usize>,
    pub h: Option<f64>,
    pub c_minus: Option<f64>,
    pub c_plus: Option<f64>,
    pub m_min: Option<usize>,
    pub m_max: Option<usize>,
}

impl WindowSpec {
    pub fn resolve(&self, n_factors: usize) -> WindowPolicy {
        let d = WindowPolicy::for_factors(n_factors);
        WindowPolicy {
            m_init: self.m_init.unwrap_or(d.m_init),
            h: self.h.unwrap_or(d.h),
            c_minus: self.c_minus.unwrap_or(d.c_minus),
            c_plus: self.c_plus.unwrap_or(d.c_plus),
            m_min: self.m_min.unwrap_or(d.m_min),
            m_max: self.m_max.unwrap_or(d.m_max),
        }
    }
}

fn default_mode() -> Mode {
    Mode::DynamicBl
}
fn default_eta() -> f64 {
    0.94
}
fn default_tau() -> f64 {
    0.025
}
fn default_fee() -> f64 {
    0.01
}
fn default_cash() -> f64 {
    1_000_000.0
}

/// Run configuration file. Relative paths resolve against the file's
/// directory; unknown keys are rejected.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub prices: PathBuf,
    pub factors: PathBuf,
    pub factor_model: FactorModel,
    /// `ticker,weight` CSV for the equilibrium prior; equal weights if absent.
    #[serde(default)]
    pub cap_weights: Option<PathBuf>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default = "default_mode")]
    pub mode: Mode,
    #[serde(default)]
    pub window: WindowSpec,
    #[serde(default)]
    pub reg: RegularizationParams,
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default)]
    pub mv: MvConfig,
    #[serde(default = "default_fee")]
    pub fee_rate: f64,
    #[serde(default = "default_cash")]
    pub initial_cash: f64,
    #[serde(default)]
    pub views: ViewOptions,
    #[serde(default)]
    pub equal_weight_daily_rebalance: bool,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        let resolve = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
        cfg.prices = resolve(&cfg.prices);
        cfg.factors = resolve(&cfg.factors);
        cfg.cap_weights = cfg.cap_weights.as_deref().map(resolve);
        cfg.out_dir = cfg.out_dir.as_deref().map(resolve);
        for p in [Some(&cfg.prices), Some(&cfg.factors), cfg.cap_weights.as_ref()].into_iter().flatten() {
            if !p.exists() {
                return Err(Error::Config(format!("referenced file does not exist: {}", p.display())));
            }
        }
        Ok(cfg)
    }

    pub fn backtest_config(&self, tickers: &[String]) -> Result<BacktestConfig> {
        let market_weights = match &self.cap_weights {
            Some(p) => Some(load_weights_csv(p, tickers)?),
            None => None,
        };
        Ok(BacktestConfig {
            window: self.window.resolve(self.factor_model.n_factors()),
            reg: self.reg,
            eta: self.eta,
            tau: self.tau,
            mv: self.mv,
            fee_rate: self.fee_rate,
            initial_cash: self.initial_cash,
            mode: self.mode,
            market_weights,
            views: self.views,
            equal_weight_daily_rebalance: self.equal_weight_daily_rebalance,
        })
    }
}

pub fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Config => 1,
        ErrorKind::Data => 2,
        ErrorKind::Numerical => 3,
    }
}

/// Parses `args` and runs the command. Returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", one_line(&e));
            exit_code(e.kind())
        }
    }
}

fn one_line(e: &Error) -> String {
    e.to_string().replace('\n', " ")
}

struct Loaded {
    prices: PricePanel,
    factors: FactorPanel,
    out_dir: PathBuf,
}

fn load_run(cli: &Cli, args: &RunArgs) -> Result<(Loaded, BacktestConfig)> {
    let path = cli.config.as_deref().ok_or_else(|| Error::Config("--config is required".into()))?;
    let cfg = RunConfig::load(path)?;
    let prices = load_price_csv(&cfg.prices)?;
    let factors = load_factor_csv(&cfg.factors, cfg.factor_model)?;
    let mut bt = cfg.backtest_config(&prices.tickers)?;
    if let Some(f) = args.fee_rate {
        bt.fee_rate = f;
    }
    if let Some(m) = args.mode {
        bt.mode = m;
    }
    for w in bt.mv.warnings() {
        eprintln!("warning: {w}");
    }
    let out_dir = cli
        .out
        .clone()
        .or_else(|| cfg.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("dynbl_out"));
    Ok((Loaded { prices, factors, out_dir }, bt))
}

fn weights_csv(res: &BacktestResult) -> String {
    let mut out = String::from("date");
    for t in &res.tickers {
        out.push(',');
        out.push_str(t);
    }
    out.push('\n');
    for (date, w) in &res.weight_history {
        let _ = write!(out, "{date}");
        for x in w.w.iter() {
            let _ = write!(out, ",{}", sig(*x, REPORT_DIGITS));
        }
        out.push('\n');
    }
    out
}

fn cmd_backtest(cli: &Cli, args: &RunArgs) -> Result<()> {
    let (l, bt) = load_run(cli, args)?;
    let res = run_backtest(&bt, &l.prices, &l.factors)?;
    write_atomic(&l.out_dir.join("trajectory.csv"), trajectory_csv(&res).as_bytes())?;
    let metrics = metrics_csv(&res);
    write_atomic(&l.out_dir.join("metrics.csv"), metrics.as_bytes())?;
    write_atomic(&l.out_dir.join("window_history.csv"), window_history_csv(&res).as_bytes())?;
    write_atomic(&l.out_dir.join("weights.csv"), weights_csv(&res).as_bytes())?;
    print!("{metrics}");
    Ok(())
}

fn cmd_compare(cli: &Cli, args: &RunArgs) -> Result<()> {
    let (l, bt) = load_run(cli, args)?;
    let rows = compare_strategies(&bt, &l.prices, &l.factors)?;
    let table = summary_csv(&rows);
    write_atomic(&l.out_dir.join("summary.csv"), table.as_bytes())?;
    print!("{table}");
    Ok(())
}

fn cmd_simulate(cli: &Cli, args: &SimulateArgs) -> Result<()> {
    let mut params = load_gbm_params_csv(&args.params)?;
    if let Some(k) = args.assets {
        if k == 0 || k > params.n_assets() {
            return Err(Error::Config(format!("--assets {k} out of range 1..={}", params.n_assets())));
        }
        params.tickers.truncate(k);
        params.drift_annual = params.drift_annual.rows(0, k).into_owned();
        params.vol_annual = params.vol_annual.rows(0, k).into_owned();
        params.s0 = params.s0.rows(0, k).into_owned();
    }
    params.n_paths = args.paths;
    params.horizon_steps = args.steps;
    params.seed = cli.seed.unwrap_or(0);
    if params.n_paths == 0 {
        return Err(Error::Config("--paths must be at least 1".into()));
    }
    params.validate()?;
    let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("dynbl_paths"));
    let width = (params.n_paths - 1).to_string().len().max(5);
    use rayon::prelude::*;
    (0..params.n_paths).into_par_iter().try_for_each(|p| {
        let panel = simulate_path(&params, p)?;
        panel.write_csv(&dir.join(format!("path_{p:0width$}.csv")))
    })
}

fn cmd_flip(cli: &Cli, prices: &Path) -> Result<()> {
    let out = cli.out.as_deref().ok_or_else(|| Error::Config("--out is required".into()))?;
    let p = load_price_csv(prices)?;
    flip_prices(&p).write_csv(out)
}

fn cmd_metrics(cli: &Cli, args: &MetricsArgs) -> Result<()> {
    let input = &args.input;
    if !input.exists() {
        return Err(Error::MissingFile(input.clone()));
    }
    let text = std::fs::read_to_string(input).map_err(|source| Error::Io { path: input.clone(), source })?;
    let header = text.lines().next().unwrap_or("");
    let is_trajectory = header.split(',').any(|c| c.trim().eq_ignore_ascii_case("account_value"));
    let (dates, series): (Vec<_>, Vec<(String, Vec<f64>)>) = if is_trajectory {
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let col = rdr
            .headers()
            .map_err(|e| Error::MalformedHeader(e.to_string()))?
            .iter()
            .position(|c| c.trim().eq_ignore_ascii_case("account_value"))
            .expect("checked above");
        let mut dates = Vec::new();
        let mut values = Vec::new();
        for (k, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::MalformedRow { line: k + 2, reason: e.to_string() })?;
            let date = chrono::NaiveDate::parse_from_str(rec[0].trim(), "%Y-%m-%d").map_err(|_| Error::MalformedValue {
                row: k + 1,
                column: "date".into(),
                value: rec[0].to_string(),
            })?;
            let v: f64 = rec[col].trim().parse().map_err(|_| Error::MalformedValue {
                row: k + 1,
                column: "account_value".into(),
                value: rec[col].to_string(),
            })?;
            dates.push(date);
            values.push(v);
        }
        (dates, vec![("account".to_string(), values)])
    } else {
        let p = load_price_csv(input)?;
        let series = p
            .tickers
            .iter()
            .enumerate()
            .map(|(j, t)| (t.clone(), p.prices.column(j).iter().copied().collect()))
            .collect();
        (p.dates, series)
    };
    if dates.len() < 2 {
        return Err(Error::TooFewRows { rows: dates.len(), required: 2 });
    }
    let rf: Vec<f64> = match (&args.factors, args.factor_model) {
        (Some(path), Some(model)) => {
            let f = load_factor_csv(path, model)?;
            dates[1..]
                .iter()
                .map(|d| {
                    f.dates
                        .binary_search(d)
                        .map(|i| f.rf[i])
                        .map_err(|_| Error::InsufficientData(format!("no risk-free rate for {d}")))
                })
                .collect::<Result<_>>()?
        }
        _ => vec![0.0; dates.len() - 1],
    };
    let mut out = String::from("series,mean_excess_daily,vol_daily,sharpe_daily,sharpe_annualized,max_drawdown\n");
    for (name, values) in &series {
        let rets: Vec<f64> = values.windows(2).map(|w| w[1] / w[0] - 1.0).collect();
        let m = compute_metrics(&rets, &rf, values)?;
        let _ = writeln!(
            out,
            "{name},{},{},{},{},{}",
            sig(m.mean_excess_daily, REPORT_DIGITS),
            sig(m.vol_daily, REPORT_DIGITS),
            sig(m.sharpe_daily, REPORT_DIGITS),
            sig(m.sharpe_annualized, REPORT_DIGITS),
            sig(m.max_drawdown, REPORT_DIGITS),
        );
    }
    match &cli.out {
        Some(p) => write_atomic(p, out.as_bytes()),
        None => {
            print!("{out}");
            Ok(())
        }
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Backtest(a) => cmd_backtest(cli, a),
        Command::Compare(a) => cmd_compare(cli, a),
        Command::Simulate(a) => cmd_simulate(cli, a),
        Command::Flip { prices } => cmd_flip(cli, prices),
        Command::Metrics(a) => cmd_metrics(cli, a),
    }
}
