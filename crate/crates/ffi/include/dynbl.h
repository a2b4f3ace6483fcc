#ifndef DYNBL_H
#define DYNBL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DynblStatus {
  DYNBL_STATUS_OK = 0,
  DYNBL_STATUS_NULL_POINTER = 1,
  DYNBL_STATUS_INVALID_ARGUMENT = 2,
  DYNBL_STATUS_CONFIG_ERROR = 3,
  DYNBL_STATUS_DATA_ERROR = 4,
  DYNBL_STATUS_NUMERICAL_ERROR = 5,
  DYNBL_STATUS_PANIC = 6,
} DynblStatus;

typedef enum DynblTrigger {
  DYNBL_TRIGGER_SHRINK = 0,
  DYNBL_TRIGGER_GROW = 1,
  DYNBL_TRIGGER_HOLD = 2,
} DynblTrigger;

/**
 * Opaque backtest result.
 */
typedef struct DynblBacktest DynblBacktest;

/**
 * Opaque price panel.
 */
typedef struct DynblPricePanel DynblPricePanel;

typedef struct DynblMetrics {
  double mean_excess_daily;
  double vol_daily;
  double sharpe_daily;
  double sharpe_annualized;
  double max_drawdown;
  double total_fees;
  double final_value;
  size_t resize_events;
} DynblMetrics;

typedef struct DynblWindowPolicy {
  size_t m_init;
  double h;
  double c_minus;
  double c_plus;
  size_t m_min;
  size_t m_max;
} DynblWindowPolicy;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failure on this thread, or null if none. The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *dynbl_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *dynbl_version(void);

/**
 * Loads a `date,<ticker>...` price CSV.
 *
 * # Safety
 * `path` must be a valid NUL-terminated string and `out` a valid pointer.
 */
enum DynblStatus dynbl_price_panel_load(const char *path, struct DynblPricePanel **out);

/**
 * # Safety
 * `panel` must be null or a handle from this library.
 */
size_t dynbl_price_panel_rows(const struct DynblPricePanel *panel);

/**
 * # Safety
 * `panel` must be null or a handle from this library.
 */
size_t dynbl_price_panel_cols(const struct DynblPricePanel *panel);

/**
 * Copies the prices, row-major, into `out` of length `rows * cols`.
 *
 * # Safety
 * `panel` must be a handle from this library and `out` must hold `len`
 * doubles.
 */
enum DynblStatus dynbl_price_panel_prices(const struct DynblPricePanel *panel,
                                          double *out,
                                          size_t len);

/**
 * Time-reversed copy of `panel`.
 *
 * # Safety
 * `panel` must be a handle from this library and `out` a valid pointer.
 */
enum DynblStatus dynbl_price_panel_flip(const struct DynblPricePanel *panel,
                                        struct DynblPricePanel **out);

/**
 * Writes `panel` as a price CSV.
 *
 * # Safety
 * `panel` must be a handle from this library and `path` a valid
 * NUL-terminated string.
 */
enum DynblStatus dynbl_price_panel_write(const struct DynblPricePanel *panel, const char *path);

/**
 * # Safety
 * `panel` must be null or a handle from this library not yet freed.
 */
void dynbl_price_panel_free(struct DynblPricePanel *panel);

/**
 * Runs the backtest described by a JSON run configuration file.
 *
 * # Safety
 * `config_path` must be a valid NUL-terminated string and `out` a valid
 * pointer.
 */
enum DynblStatus dynbl_backtest_run(const char *config_path, struct DynblBacktest **out);

/**
 * Number of account values, including the starting value.
 *
 * # Safety
 * `bt` must be null or a handle from this library.
 */
size_t dynbl_backtest_len(const struct DynblBacktest *bt);

/**
 * # Safety
 * `bt` must be a handle from this library and `out` must hold `len`
 * doubles.
 */
enum DynblStatus dynbl_backtest_account_values(const struct DynblBacktest *bt,
                                               double *out,
                                               size_t len);

/**
 * # Safety
 * `bt` must be a handle from this library and `out` a valid pointer.
 */
enum DynblStatus dynbl_backtest_metrics(const struct DynblBacktest *bt, struct DynblMetrics *out);

/**
 * # Safety
 * `bt` must be null or a handle from this library not yet freed.
 */
void dynbl_backtest_free(struct DynblBacktest *bt);

/**
 * Closed-form posterior mean (`n`) and covariance (`n x n`) for `k` views.
 *
 * # Safety
 * Array arguments must hold the documented number of doubles: `pi` and
 * `mu_out` n, `sigma` and `sigma_out` n*n, `pick` k*n, `q` k, `omega` k*k.
 */
enum DynblStatus dynbl_bl_closed_form(size_t n,
                                      size_t k,
                                      const double *pi,
                                      const double *sigma,
                                      double tau,
                                      const double *pick,
                                      const double *q,
                                      const double *omega,
                                      double *mu_out,
                                      double *sigma_out);

/**
 * Box-constrained mean-variance weights.
 *
 * # Safety
 * `mu` and `w_out` must hold `n` doubles, `sigma` `n * n`.
 */
enum DynblStatus dynbl_solve_mean_variance(size_t n,
                                           const double *mu,
                                           const double *sigma,
                                           double rho,
                                           double box_bound,
                                           double *w_out);

/**
 * `eta * sigma_hat + (1 - eta) r rᵀ`.
 *
 * # Safety
 * `sigma_hat` and `out` must hold `n * n` doubles, `r` `n`.
 */
enum DynblStatus dynbl_ewma_covariance(size_t n,
                                       const double *sigma_hat,
                                       const double *r,
                                       double eta,
                                       double *out);

/**
 * Next window size after a block with volatility `sigma_now`.
 *
 * # Safety
 * `policy`, `m_out` and `trigger_out` must be valid pointers.
 */
enum DynblStatus dynbl_adjust_window(double sigma_now,
                                     double sigma_prev,
                                     const struct DynblWindowPolicy *policy,
                                     size_t m,
                                     size_t *m_out,
                                     enum DynblTrigger *trigger_out);

/**
 * Largest peak-to-trough decline of `values` as a fraction of the peak.
 *
 * # Safety
 * `values` must hold `len` doubles and `out` be a valid pointer.
 */
enum DynblStatus dynbl_max_drawdown(const double *values, size_t len, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DYNBL_H */
