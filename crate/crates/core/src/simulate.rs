//! Geometric Brownian motion price panels and the price-flip transform.

use std::path::Path;

use chrono::{Datelike, Duration, NaiveDate, Weekday};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::data::PricePanel;
use crate::error::{Error, Result};
use crate::linalg::cholesky_lower;

#[derive(Debug, Clone, PartialEq)]
pub struct GbmParams {
    pub tickers: Vec<String>,
    /// Annualized drift, decimal.
    pub drift_annual: DVector<f64>,
    /// Annualized volatility, decimal.
    pub vol_annual: DVector<f64>,
    pub s0: DVector<f64>,
    /// Year fraction per step.
    pub dt: f64,
    pub horizon_steps: usize,
    pub n_paths: usize,
    pub seed: u64,
    /// Date of the initial price; later rows fall on weekdays.
    pub start_date: NaiveDate,
    /// Correlation of the per-step shocks; independent when unset.
    pub correlation: Option<DMatrix<f64>>,
}

impl GbmParams {
    /// Independent assets starting at 100, one year of daily steps, one path.
    pub fn new(tickers: Vec<String>, drift_annual: DVector<f64>, vol_annual: DVector<f64>) -> Self {
        let n = tickers.len();
        Self {
            tickers,
            drift_annual,
            vol_annual,
            s0: DVector::from_element(n, 100.0),
            dt: 1.0 / 252.0,
            horizon_steps: 252,
            n_paths: 1,
            seed: 0,
            start_date: NaiveDate::from_ymd_opt(2020, 1, 2).expect("valid date"),
            correlation: None,
        }
    }

    pub fn n_assets(&self) -> usize {
        self.tickers.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_assets();
        if n == 0 {
            return Err(Error::InvalidParameter("no assets".into()));
        }
        if self.drift_annual.len() != n || self.vol_annual.len() != n || self.s0.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{n} tickers with {} drifts, {} vols, {} initial prices",
                self.drift_annual.len(),
                self.vol_annual.len(),
                self.s0.len()
            )));
        }
        if let Some(i) = self.vol_annual.iter().position(|v| !(*v >= 0.0)) {
            return Err(Error::NegativeVol(self.tickers[i].clone()));
        }
        if self.s0.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::InvalidParameter("initial prices must be positive".into()));
        }
        if self.drift_annual.iter().any(|d| !d.is_finite()) || self.vol_annual.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("drift or volatility".into()));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {}", self.dt)));
        }
        if self.n_paths == 0 {
            return Err(Error::InvalidParameter("n_paths must be at least 1".into()));
        }
        if let Some(c) = &self.correlation {
            if c.nrows() != n || c.ncols() != n {
                return Err(Error::DimensionMismatch(format!("correlation is {}x{}, need {n}x{n}", c.nrows(), c.ncols())));
            }
            cholesky_lower(c, "correlation")?;
        }
        Ok(())
    }
}

fn next_weekday(d: NaiveDate) -> NaiveDate {
    let mut d = d + Duration::days(1);
    while matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
        d += Duration::days(1);
    }
    d
}

/// `n` consecutive weekdays starting at `start` (moved forward off a weekend).
pub fn weekday_dates(start: NaiveDate, n: usize) -> Vec<NaiveDate> {
    let mut d = start;
    while matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
        d += Duration::days(1);
    }
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        out.push(d);
        d = next_weekday(d);
    }
    out
}

/// Generator for one (path, asset) pair. The stream id is the pair itself,
/// so draws never depend on generation order.
fn stream(seed: u64, path: usize, asset: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((path as u64) << 32) | asset as u64);
    rng
}

/// Path `path_idx` of the simulation: `horizon_steps + 1` rows, the first
/// holding `s0`.
pub fn simulate_path(params: &GbmParams, path_idx: usize) -> Result<PricePanel> {
    params.validate()?;
    let n = params.n_assets();
    let steps = params.horizon_steps;
    let mut shocks = DMatrix::<f64>::zeros(steps, n);
    for j in 0..n {
        let mut rng = stream(params.seed, path_idx, j);
        for t in 0..steps {
            shocks[(t, j)] = StandardNormal.sample(&mut rng);
        }
    }
    if let Some(c) = &params.correlation {
        let l = cholesky_lower(c, "correlation")?;
        shocks *= l.transpose();
    }
    let sqrt_dt = params.dt.sqrt();
    let mut prices = DMatrix::<f64>::zeros(steps + 1, n);
    for j in 0..n {
        let (mu, sigma) = (params.drift_annual[j], params.vol_annual[j]);
        let drift = (mu - 0.5 * sigma * sigma) * params.dt;
        let mut log_s = params.s0[j].ln();
        prices[(0, j)] = params.s0[j];
        for t in 0..steps {
            log_s += drift + sigma * sqrt_dt * shocks[(t, j)];
            prices[(t + 1, j)] = log_s.exp();
        }
    }
    if prices.iter().any(|p| !(*p > 0.0 && p.is_finite())) {
        return Err(Error::NonFinite(format!("simulated prices on path {path_idx}")));
    }
    PricePanel::new(weekday_dates(params.start_date, steps + 1), params.tickers.clone(), prices)
}

/// All `n_paths` paths, generated in parallel.
pub fn simulate_gbm(params: &GbmParams) -> Result<Vec<PricePanel>> {
    params.validate()?;
    (0..params.n_paths).into_par_iter().map(|p| simulate_path(params, p)).collect()
}

fn parse_rate(raw: &str, percent_column: bool) -> Option<f64> {
    let s = raw.trim();
    let (body, pct) = match s.strip_suffix('%') {
        Some(b) => (b.trim(), true),
        None => (s, percent_column),
    };
    let v: f64 = body.parse().ok()?;
    v.is_finite().then_some(if pct { v / 100.0 } else { v })
}

fn column_flag(name: &str) -> (String, bool) {
    let lower = name.trim().to_ascii_lowercase();
    for suffix in ["_pct", "%", "(%)"] {
        if let Some(base) = lower.strip_suffix(suffix) {
            return (base.trim().to_string(), true);
        }
    }
    (lower, false)
}

/// Reads `ticker,drift,vol[,s0]`.
///
/// A value with a trailing `%` is a percentage. A `_pct` or `%` suffix on a
/// header name makes every value in that column a percentage. Other values
/// are decimals. Simulation settings other than the per-asset columns keep
/// the defaults of [`GbmParams::new`].
pub fn load_gbm_params_csv(path: &Path) -> Result<GbmParams> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    parse_gbm_params(&text)
}

pub fn parse_gbm_params(text: &str) -> Result<GbmParams> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).flexible(true).from_reader(text.as_bytes());
    let headers = rdr.headers().map_err(|e| Error::MalformedHeader(e.to_string()))?.clone();
    let cols: Vec<(String, bool)> = headers.iter().map(column_flag).collect();
    let find = |name: &str| cols.iter().position(|(c, _)| c == name);
    let ti = find("ticker").ok_or_else(|| Error::MissingColumn("ticker".into()))?;
    let di = find("drift").ok_or_else(|| Error::MissingColumn("drift".into()))?;
    let vi = find("vol").ok_or_else(|| Error::MissingColumn("vol".into()))?;
    let si = find("s0");
    if let Some((extra, _)) = cols.iter().find(|(c, _)| !matches!(c.as_str(), "ticker" | "drift" | "vol" | "s0")) {
        return Err(Error::UnexpectedColumn(extra.clone()));
    }

    let (mut tickers, mut drift, mut vol, mut s0) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (k, rec) in rdr.records().enumerate() {
        let line = k + 2;
        let rec = rec.map_err(|e| Error::MalformedRow { line, reason: e.to_string() })?;
        if rec.len() != cols.len() {
            return Err(Error::MalformedRow {
                line,
                reason: format!("{} fields, expected {}", rec.len(), cols.len()),
            });
        }
        let ticker = rec[ti].to_string();
        if ticker.is_empty() {
            return Err(Error::MalformedRow { line, reason: "empty ticker".into() });
        }
        let d = parse_rate(&rec[di], cols[di].1)
            .ok_or_else(|| Error::MalformedRow { line, reason: format!("bad drift {:?}", &rec[di]) })?;
        let v = parse_rate(&rec[vi], cols[vi].1)
            .ok_or_else(|| Error::MalformedRow { line, reason: format!("bad vol {:?}", &rec[vi]) })?;
        if v < 0.0 {
            return Err(Error::NegativeVol(ticker));
        }
        let s = match si {
            Some(i) => rec[i]
                .parse::<f64>()
                .ok()
                .filter(|s| *s > 0.0 && s.is_finite())
                .ok_or_else(|| Error::MalformedRow { line, reason: format!("bad s0 {:?}", &rec[i]) })?,
            None => 100.0,
        };
        tickers.push(ticker);
        drift.push(d);
        vol.push(v);
        s0.push(s);
    }
    if tickers.is_empty() {
        return Err(Error::InsufficientData("no parameter rows".into()));
    }
    let mut params = GbmParams::new(tickers, DVector::from_vec(drift), DVector::from_vec(vol));
    params.s0 = DVector::from_vec(s0);
    Ok(params)
}

/// Reverses each price series in time; dates keep their order.
pub fn flip_prices(p: &PricePanel) -> PricePanel {
    let t = p.len();
    let prices = DMatrix::from_fn(t, p.n_assets(), |i, j| p.prices[(t - 1 - i, j)]);
    PricePanel {
        dates: p.dates.clone(),
        tickers: p.tickers.clone(),
        prices,
    }
}
