//! Price, return and factor panels, and their CSV representation.
//!
//! Files are UTF-8, comma separated, with a header row and ISO-8601 dates.
//! Price files are wide (`date,<ticker>...`); factor files carry
//! `date,<factors...>,rf` in decimal units. Rows may appear in any order and
//! are sorted on load. Missing values are rejected rather than imputed.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fmt::{sig, write_atomic, PANEL_DIGITS};

const DATE_FMT: &str = "%Y-%m-%d";

/// Adjusted closing prices, one row per date and one column per ticker.
#[derive(Debug, Clone, PartialEq)]
pub struct PricePanel {
    pub dates: Vec<NaiveDate>,
    pub tickers: Vec<String>,
    pub prices: DMatrix<f64>,
}

/// Simple per-period returns. Row `t` is dated by the later of the two
/// prices in the ratio.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnPanel {
    pub dates: Vec<NaiveDate>,
    pub tickers: Vec<String>,
    pub returns: DMatrix<f64>,
}

/// Factor realizations plus the per-period risk-free rate.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorPanel {
    pub dates: Vec<NaiveDate>,
    pub model: FactorModel,
    pub factor_names: Vec<String>,
    pub values: DMatrix<f64>,
    pub rf: DVector<f64>,
}

/// Supported factor layouts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FactorModel {
    /// Market, size, value, profitability, investment.
    Ff5,
    /// Market, size, value, momentum.
    Carhart4,
}

impl FactorModel {
    /// Factor columns in canonical order.
    pub fn factor_names(self) -> &'static [&'static str] {
        match self {
            FactorModel::Ff5 => &["MKTRF", "SMB", "HML", "RMW", "CMA"],
            FactorModel::Carhart4 => &["MKTRF", "SMB", "HML", "UMD"],
        }
    }

    pub fn n_factors(self) -> usize {
        self.factor_names().len()
    }
}

impl FromStr for FactorModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ff5" => Ok(FactorModel::Ff5),
            "carhart4" => Ok(FactorModel::Carhart4),
            other => Err(Error::InvalidParameter(format!(
                "unknown factor model `{other}` (expected ff5 or carhart4)"
            ))),
        }
    }
}

impl std::fmt::Display for FactorModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FactorModel::Ff5 => "ff5",
            FactorModel::Carhart4 => "carhart4",
        })
    }
}

fn check_dates(dates: &[NaiveDate]) -> Result<()> {
    for w in dates.windows(2) {
        if w[1] == w[0] {
            return Err(Error::DuplicateDate(w[0]));
        }
        if w[1] < w[0] {
            return Err(Error::InvalidParameter(format!(
                "dates out of order: {} after {}",
                w[1], w[0]
            )));
        }
    }
    Ok(())
}

impl PricePanel {
    /// Builds a panel, checking every invariant.
    pub fn new(dates: Vec<NaiveDate>, tickers: Vec<String>, prices: DMatrix<f64>) -> Result<Self> {
        if prices.nrows() != dates.len() || prices.ncols() != tickers.len() {
            return Err(Error::DimensionMismatch(format!(
                "price matrix {}x{} vs {} dates and {} tickers",
                prices.nrows(),
                prices.ncols(),
                dates.len(),
                tickers.len()
            )));
        }
        check_dates(&dates)?;
        for (r, row) in prices.row_iter().enumerate() {
            for (c, &p) in row.iter().enumerate() {
                if !(p.is_finite() && p > 0.0) {
                    return Err(Error::NonPositivePrice {
                        row: r + 1,
                        column: tickers[c].clone(),
                    });
                }
            }
        }
        Ok(Self {
            dates,
            tickers,
            prices,
        })
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn n_assets(&self) -> usize {
        self.tickers.len()
    }

    /// Serializes in the wide price layout with 15 significant digits.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("date");
        for t in &self.tickers {
            out.push(',');
            out.push_str(t);
        }
        out.push('\n');
        for (d, row) in self.dates.iter().zip(self.prices.row_iter()) {
            let _ = write!(out, "{}", d.format(DATE_FMT));
            for &p in row.iter() {
                out.push(',');
                out.push_str(&sig(p, PANEL_DIGITS));
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_csv_string().as_bytes())
    }
}

impl ReturnPanel {
    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn n_assets(&self) -> usize {
        self.tickers.len()
    }

    pub fn select_rows(&self, idx: &[usize]) -> Self {
        Self {
            dates: idx.iter().map(|&i| self.dates[i]).collect(),
            tickers: self.tickers.clone(),
            returns: self.returns.select_rows(idx),
        }
    }
}

impl FactorPanel {
    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn n_factors(&self) -> usize {
        self.factor_names.len()
    }

    pub fn select_rows(&self, idx: &[usize]) -> Self {
        Self {
            dates: idx.iter().map(|&i| self.dates[i]).collect(),
            model: self.model,
            factor_names: self.factor_names.clone(),
            values: self.values.select_rows(idx),
            rf: DVector::from_iterator(idx.len(), idx.iter().map(|&i| self.rf[i])),
        }
    }
}

fn open(path: &Path) -> Result<std::fs::File> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn csv_reader<R: Read>(rdr: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(rdr)
}

fn parse_date(s: &str, row: usize) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(s, DATE_FMT).map_err(|_| Error::MalformedValue {
        row,
        column: "date".into(),
        value: s.into(),
    })
}

fn parse_number(s: &str, row: usize, column: &str) -> Result<f64> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::MalformedValue {
            row,
            column: column.into(),
            value: s.into(),
        }),
    }
}

fn record_error(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    Error::MalformedRow {
        line,
        reason: e.to_string(),
    }
}

/// Reads a wide price file: `date,<ticker>...`.
pub fn load_price_csv(path: &Path) -> Result<PricePanel> {
    parse_price_csv(open(path)?)
}

pub fn parse_price_csv<R: Read>(rdr: R) -> Result<PricePanel> {
    let mut rdr = csv_reader(rdr);
    let header = rdr
        .headers()
        .map_err(|e| Error::MalformedHeader(e.to_string()))?
        .clone();
    if header.get(0) != Some("date") {
        return Err(Error::MalformedHeader(
            "first column must be `date`".into(),
        ));
    }
    let tickers: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    if tickers.is_empty() {
        return Err(Error::MalformedHeader("no ticker columns".into()));
    }
    let mut seen = HashSet::new();
    for t in &tickers {
        if t.is_empty() || !seen.insert(t.as_str()) {
            return Err(Error::MalformedHeader(format!("empty or repeated ticker `{t}`")));
        }
    }

    let mut rows: Vec<(NaiveDate, Vec<f64>)> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(record_error)?;
        let row = i + 1;
        let date = parse_date(&rec[0], row)?;
        let mut vals = Vec::with_capacity(tickers.len());
        for (c, t) in tickers.iter().enumerate() {
            let v = parse_number(&rec[c + 1], row, t)?;
            if v <= 0.0 {
                return Err(Error::NonPositivePrice {
                    row,
                    column: t.clone(),
                });
            }
            vals.push(v);
        }
        rows.push((date, vals));
    }
    rows.sort_by_key(|(d, _)| *d);
    let dates: Vec<NaiveDate> = rows.iter().map(|(d, _)| *d).collect();
    check_dates(&dates)?;
    let prices = DMatrix::from_fn(rows.len(), tickers.len(), |r, c| rows[r].1[c]);
    PricePanel::new(dates, tickers, prices)
}

/// Reads a factor file for `model`: `date`, `rf` and exactly the model's
/// factor columns, in any column order.
pub fn load_factor_csv(path: &Path, model: FactorModel) -> Result<FactorPanel> {
    parse_factor_csv(open(path)?, model)
}

pub fn parse_factor_csv<R: Read>(rdr: R, model: FactorModel) -> Result<FactorPanel> {
    let mut rdr = csv_reader(rdr);
    let header = rdr
        .headers()
        .map_err(|e| Error::MalformedHeader(e.to_string()))?
        .clone();
    let upper: Vec<String> = header.iter().map(|h| h.to_ascii_uppercase()).collect();
    let find = |name: &str| upper.iter().position(|h| h == name);

    let date_col = find("DATE").ok_or_else(|| Error::MissingColumn("date".into()))?;
    let rf_col = find("RF").ok_or_else(|| Error::MissingColumn("rf".into()))?;
    let mut factor_cols = Vec::with_capacity(model.n_factors());
    for &name in model.factor_names() {
        factor_cols.push(find(name).ok_or_else(|| Error::MissingColumn(name.into()))?);
    }
    for (i, h) in header.iter().enumerate() {
        if i != date_col && i != rf_col && !factor_cols.contains(&i) {
            return Err(Error::UnexpectedColumn(h.to_string()));
        }
    }

    let mut rows: Vec<(NaiveDate, Vec<f64>, f64)> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(record_error)?;
        let row = i + 1;
        let date = parse_date(&rec[date_col], row)?;
        let vals = factor_cols
            .iter()
            .zip(model.factor_names())
            .map(|(&c, name)| parse_number(&rec[c], row, name))
            .collect::<Result<Vec<_>>>()?;
        let rf = parse_number(&rec[rf_col], row, "rf")?;
        rows.push((date, vals, rf));
    }
    rows.sort_by_key(|(d, _, _)| *d);
    let dates: Vec<NaiveDate> = rows.iter().map(|(d, _, _)| *d).collect();
    check_dates(&dates)?;
    let j = model.n_factors();
    Ok(FactorPanel {
        values: DMatrix::from_fn(rows.len(), j, |r, c| rows[r].1[c]),
        rf: DVector::from_iterator(rows.len(), rows.iter().map(|r| r.2)),
        dates,
        model,
        factor_names: model.factor_names().iter().map(|s| s.to_string()).collect(),
    })
}

/// Simple returns `p[t+1] / p[t] - 1`.
pub fn compute_returns(p: &PricePanel) -> Result<ReturnPanel> {
    let t = p.len();
    if t < 2 {
        return Err(Error::TooFewRows {
            rows: t,
            required: 2,
        });
    }
    let returns = DMatrix::from_fn(t - 1, p.n_assets(), |r, c| {
        p.prices[(r + 1, c)] / p.prices[(r, c)] - 1.0
    });
    Ok(ReturnPanel {
        dates: p.dates[1..].to_vec(),
        tickers: p.tickers.clone(),
        returns,
    })
}

/// Restricts both panels to their common dates.
pub fn align(r: &ReturnPanel, f: &FactorPanel) -> Result<(ReturnPanel, FactorPanel)> {
    let (mut i, mut j) = (0, 0);
    let (mut ri, mut fi) = (Vec::new(), Vec::new());
    while i < r.dates.len() && j < f.dates.len() {
        match r.dates[i].cmp(&f.dates[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                ri.push(i);
                fi.push(j);
                i += 1;
                j += 1;
            }
        }
    }
    if ri.len() < 2 {
        return Err(Error::EmptyIntersection);
    }
    Ok((r.select_rows(&ri), f.select_rows(&fi)))
}

/// Reads `ticker,weight` rows and returns weights ordered like `tickers`,
/// normalized to sum to one.
pub fn load_weights_csv(path: &Path, tickers: &[String]) -> Result<DVector<f64>> {
    let mut rdr = csv_reader(open(path)?);
    let header = rdr
        .headers()
        .map_err(|e| Error::MalformedHeader(e.to_string()))?
        .clone();
    if header.len() != 2 || &header[0] != "ticker" || &header[1] != "weight" {
        return Err(Error::MalformedHeader("expected `ticker,weight`".into()));
    }
    let mut w = vec![f64::NAN; tickers.len()];
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(record_error)?;
        let pos = tickers
            .iter()
            .position(|t| t == &rec[0])
            .ok_or_else(|| Error::UnexpectedColumn(rec[0].to_string()))?;
        let v = parse_number(&rec[1], i + 1, "weight")?;
        if v < 0.0 {
            return Err(Error::MalformedValue {
                row: i + 1,
                column: "weight".into(),
                value: rec[1].to_string(),
            });
        }
        w[pos] = v;
    }
    if let Some(k) = w.iter().position(|x| x.is_nan()) {
        return Err(Error::MissingColumn(tickers[k].clone()));
    }
    let total: f64 = w.iter().sum();
    if total <= 0.0 {
        return Err(Error::InvalidParameter("market weights sum to zero".into()));
    }
    Ok(DVector::from_iterator(w.len(), w.iter().map(|x| x / total)))
}
