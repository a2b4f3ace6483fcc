//! C ABI for the dynbl portfolio engine.
//!
//! Every fallible function returns a [`DynblStatus`]. On failure a message is
//! kept per thread and read with [`dynbl_last_error_message`]. Matrices are
//! dense row-major `double` arrays. Handles are opaque and released with the
//! matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use dynbl::backtest::{adjust_window, run_backtest, BacktestResult, Trigger, WindowPolicy};
use dynbl::black_litterman::{bl_closed_form, ewma_covariance, BlInputs};
use dynbl::cli::RunConfig;
use dynbl::data::{load_factor_csv, load_price_csv, PricePanel};
use dynbl::factor_model::ViewSet;
use dynbl::optimizer::{solve_mean_variance, MvConfig};
use dynbl::simulate::flip_prices;
use dynbl::{Error, ErrorKind};
use nalgebra::{DMatrix, DVector};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DynblStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ConfigError = 3,
    DataError = 4,
    NumericalError = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DynblTrigger {
    Shrink = 0,
    Grow = 1,
    Hold = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DynblWindowPolicy {
    pub m_init: usize,
    pub h: f64,
    pub c_minus: f64,
    pub c_plus: f64,
    pub m_min: usize,
    pub m_max: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DynblMetrics {
    pub mean_excess_daily: f64,
    pub vol_daily: f64,
    pub sharpe_daily: f64,
    pub sharpe_annualized: f64,
    pub max_drawdown: f64,
    pub total_fees: f64,
    pub final_value: f64,
    pub resize_events: usize,
}

/// Opaque price panel.
pub struct DynblPricePanel {
    inner: PricePanel,
}

/// Opaque backtest result.
pub struct DynblBacktest {
    inner: BacktestResult,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(DynblStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e.kind() {
            ErrorKind::Config => DynblStatus::ConfigError,
            ErrorKind::Data => DynblStatus::DataError,
            ErrorKind::Numerical => DynblStatus::NumericalError,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(DynblStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(DynblStatus::InvalidArgument, msg.into())
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> DynblStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DynblStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            DynblStatus::Panic
        }
    }
}

unsafe fn input<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn output<'a>(p: *mut f64, len: usize, what: &str) -> Result<&'a mut [f64], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn path_arg(p: *const c_char, what: &str) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    let s = CStr::from_ptr(p).to_str().map_err(|_| invalid(format!("{what} is not UTF-8")))?;
    Ok(PathBuf::from(s))
}

fn matrix(data: &[f64], rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_row_slice(rows, cols, data)
}

fn write_matrix(m: &DMatrix<f64>, out: &mut [f64]) {
    let cols = m.ncols();
    for i in 0..m.nrows() {
        for j in 0..cols {
            out[i * cols + j] = m[(i, j)];
        }
    }
}

/// Message for the last failure on this thread, or null if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn dynbl_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn dynbl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a `date,<ticker>...` price CSV.
///
/// # Safety
/// `path` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dynbl_price_panel_load(path: *const c_char, out: *mut *mut DynblPricePanel) -> DynblStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let panel = load_price_csv(&path_arg(path, "path")?)?;
        *out = Box::into_raw(Box::new(DynblPricePanel { inner: panel }));
        Ok(())
    })
}

/// # Safety
/// `panel` must be null or a handle from this library.
#[no_mangle]
pub unsafe extern "C" fn dynbl_price_panel_rows(panel: *const DynblPricePanel) -> usize {
    panel.as_ref().map_or(0, |p| p.inner.len())
}

/// # Safety
/// `panel` must be null or a handle from this library.
#[no_mangle]
pub unsafe extern "C" fn dynbl_price_panel_cols(panel: *const DynblPricePanel) -> usize {
    panel.as_ref().map_or(0, |p| p.inner.n_assets())
}

/// Copies the prices, row-major, into `out` of length `rows * cols`.
///
/// # Safety
/// `panel` must be a handle from this library and `out` must hold `len`
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn dynbl_price_panel_prices(panel: *const DynblPricePanel, out: *mut f64, len: usize) -> DynblStatus {
    guard(|| {
        let p = &panel.as_ref().ok_or_else(|| null("panel"))?.inner;
        let need = p.len() * p.n_assets();
        if len != need {
            return Err(invalid(format!("buffer holds {len} values, need {need}")));
        }
        write_matrix(&p.prices, output(out, len, "out")?);
        Ok(())
    })
}

/// Time-reversed copy of `panel`.
///
/// # Safety
/// `panel` must be a handle from this library and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dynbl_price_panel_flip(panel: *const DynblPricePanel, out: *mut *mut DynblPricePanel) -> DynblStatus {
    guard(|| {
        let p = &panel.as_ref().ok_or_else(|| null("panel"))?.inner;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = Box::into_raw(Box::new(DynblPricePanel { inner: flip_prices(p) }));
        Ok(())
    })
}

/// Writes `panel` as a price CSV.
///
/// # Safety
/// `panel` must be a handle from this library and `path` a valid
/// NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn dynbl_price_panel_write(panel: *const DynblPricePanel, path: *const c_char) -> DynblStatus {
    guard(|| {
        let p = &panel.as_ref().ok_or_else(|| null("panel"))?.inner;
        p.write_csv(&path_arg(path, "path")?)?;
        Ok(())
    })
}

/// # Safety
/// `panel` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dynbl_price_panel_free(panel: *mut DynblPricePanel) {
    if !panel.is_null() {
        drop(Box::from_raw(panel));
    }
}

/// Runs the backtest described by a JSON run configuration file.
///
/// # Safety
/// `config_path` must be a valid NUL-terminated string and `out` a valid
/// pointer.
#[no_mangle]
pub unsafe extern "C" fn dynbl_backtest_run(config_path: *const c_char, out: *mut *mut DynblBacktest) -> DynblStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let cfg = RunConfig::load(&path_arg(config_path, "config_path")?)?;
        let prices = load_price_csv(&cfg.prices)?;
        let factors = load_factor_csv(&cfg.factors, cfg.factor_model)?;
        let bt = cfg.backtest_config(&prices.tickers)?;
        let res = run_backtest(&bt, &prices, &factors)?;
        *out = Box::into_raw(Box::new(DynblBacktest { inner: res }));
        Ok(())
    })
}

/// Number of account values, including the starting value.
///
/// # Safety
/// `bt` must be null or a handle from this library.
#[no_mangle]
pub unsafe extern "C" fn dynbl_backtest_len(bt: *const DynblBacktest) -> usize {
    bt.as_ref().map_or(0, |b| b.inner.account_values.len())
}

/// # Safety
/// `bt` must be a handle from this library and `out` must hold `len`
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn dynbl_backtest_account_values(bt: *const DynblBacktest, out: *mut f64, len: usize) -> DynblStatus {
    guard(|| {
        let b = &bt.as_ref().ok_or_else(|| null("bt"))?.inner;
        if len != b.account_values.len() {
            return Err(invalid(format!("buffer holds {len} values, need {}", b.account_values.len())));
        }
        output(out, len, "out")?.copy_from_slice(&b.account_values);
        Ok(())
    })
}

/// # Safety
/// `bt` must be a handle from this library and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dynbl_backtest_metrics(bt: *const DynblBacktest, out: *mut DynblMetrics) -> DynblStatus {
    guard(|| {
        let b = &bt.as_ref().ok_or_else(|| null("bt"))?.inner;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let m = b.metrics;
        *out = DynblMetrics {
            mean_excess_daily: m.mean_excess_daily,
            vol_daily: m.vol_daily,
            sharpe_daily: m.sharpe_daily,
            sharpe_annualized: m.sharpe_annualized,
            max_drawdown: m.max_drawdown,
            total_fees: b.total_fees,
            final_value: *b.account_values.last().unwrap_or(&f64::NAN),
            resize_events: b.resize_events(),
        };
        Ok(())
    })
}

/// # Safety
/// `bt` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dynbl_backtest_free(bt: *mut DynblBacktest) {
    if !bt.is_null() {
        drop(Box::from_raw(bt));
    }
}

/// Closed-form posterior mean (`n`) and covariance (`n x n`) for `k` views.
///
/// # Safety
/// Array arguments must hold the documented number of doubles: `pi` and
/// `mu_out` n, `sigma` and `sigma_out` n*n, `pick` k*n, `q` k, `omega` k*k.
#[no_mangle]
pub unsafe extern "C" fn dynbl_bl_closed_form(
    n: usize,
    k: usize,
    pi: *const f64,
    sigma: *const f64,
    tau: f64,
    pick: *const f64,
    q: *const f64,
    omega: *const f64,
    mu_out: *mut f64,
    sigma_out: *mut f64,
) -> DynblStatus {
    guard(|| {
        if n == 0 {
            return Err(invalid("n must be positive"));
        }
        let views = ViewSet {
            q: DVector::from_column_slice(input(q, k, "q")?),
            pick: matrix(input(pick, k * n, "pick")?, k, n),
            omega: matrix(input(omega, k * k, "omega")?, k, k),
        };
        let inputs = BlInputs::new(
            DVector::from_column_slice(input(pi, n, "pi")?),
            matrix(input(sigma, n * n, "sigma")?, n, n),
            tau,
            views,
        )?;
        let est = bl_closed_form(&inputs)?;
        output(mu_out, n, "mu_out")?.copy_from_slice(est.mu_hat.as_slice());
        write_matrix(&est.sigma_hat, output(sigma_out, n * n, "sigma_out")?);
        Ok(())
    })
}

/// Box-constrained mean-variance weights.
///
/// # Safety
/// `mu` and `w_out` must hold `n` doubles, `sigma` `n * n`.
#[no_mangle]
pub unsafe extern "C" fn dynbl_solve_mean_variance(
    n: usize,
    mu: *const f64,
    sigma: *const f64,
    rho: f64,
    box_bound: f64,
    w_out: *mut f64,
) -> DynblStatus {
    guard(|| {
        if n == 0 {
            return Err(invalid("n must be positive"));
        }
        let w = solve_mean_variance(
            &DVector::from_column_slice(input(mu, n, "mu")?),
            &matrix(input(sigma, n * n, "sigma")?, n, n),
            &MvConfig { rho, box_bound },
        )?;
        output(w_out, n, "w_out")?.copy_from_slice(w.w.as_slice());
        Ok(())
    })
}

/// `eta * sigma_hat + (1 - eta) r rᵀ`.
///
/// # Safety
/// `sigma_hat` and `out` must hold `n * n` doubles, `r` `n`.
#[no_mangle]
pub unsafe extern "C" fn dynbl_ewma_covariance(
    n: usize,
    sigma_hat: *const f64,
    r: *const f64,
    eta: f64,
    out: *mut f64,
) -> DynblStatus {
    guard(|| {
        let e = ewma_covariance(
            &matrix(input(sigma_hat, n * n, "sigma_hat")?, n, n),
            &DVector::from_column_slice(input(r, n, "r")?),
            eta,
        )?;
        write_matrix(&e, output(out, n * n, "out")?);
        Ok(())
    })
}

/// Next window size after a block with volatility `sigma_now`.
///
/// # Safety
/// `policy`, `m_out` and `trigger_out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn dynbl_adjust_window(
    sigma_now: f64,
    sigma_prev: f64,
    policy: *const DynblWindowPolicy,
    m: usize,
    m_out: *mut usize,
    trigger_out: *mut DynblTrigger,
) -> DynblStatus {
    guard(|| {
        let p = policy.as_ref().ok_or_else(|| null("policy"))?;
        if !(sigma_now >= 0.0 && sigma_prev >= 0.0) {
            return Err(invalid("volatilities must be non-negative"));
        }
        if !(p.m_min..=p.m_max).contains(&m) {
            return Err(invalid(format!("m = {m} outside [{}, {}]", p.m_min, p.m_max)));
        }
        let policy = WindowPolicy {
            m_init: p.m_init,
            h: p.h,
            c_minus: p.c_minus,
            c_plus: p.c_plus,
            m_min: p.m_min,
            m_max: p.m_max,
        };
        let (next, trigger) = adjust_window(sigma_now, sigma_prev, &policy, m);
        *m_out.as_mut().ok_or_else(|| null("m_out"))? = next;
        *trigger_out.as_mut().ok_or_else(|| null("trigger_out"))? = match trigger {
            Trigger::Shrink => DynblTrigger::Shrink,
            Trigger::Grow => DynblTrigger::Grow,
            Trigger::Hold => DynblTrigger::Hold,
        };
        Ok(())
    })
}

/// Largest peak-to-trough decline of `values` as a fraction of the peak.
///
/// # Safety
/// `values` must hold `len` doubles and `out` be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dynbl_max_drawdown(values: *const f64, len: usize, out: *mut f64) -> DynblStatus {
    guard(|| {
        let v = input(values, len, "values")?;
        *out.as_mut().ok_or_else(|| null("out"))? = dynbl::backtest::max_drawdown(v);
        Ok(())
    })
}
