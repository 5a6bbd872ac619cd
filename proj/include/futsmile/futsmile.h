/* C interface to the futures smile library. All functions return an fsm_status; on failure
 * fsm_last_error() describes the problem (per thread). Handles are opaque and owned by the caller. */
#ifndef FUTSMILE_H
#define FUTSMILE_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(FUTSMILE_BUILDING_DLL)
#    define FSM_API __declspec(dllexport)
#  else
#    define FSM_API __declspec(dllimport)
#  endif
#else
#  define FSM_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum fsm_status {
    FSM_OK = 0,
    FSM_ERR_IO = 1,
    FSM_ERR_NOT_CONVERGED = 2,
    FSM_ERR_INVALID = 3,   /* validation, parse, arbitrage, date order, out of range */
    FSM_ERR_NUMERICAL = 4,
    FSM_ERR_SCHEMA = 5,    /* model schema mismatch or unsupported request */
    FSM_ERR_INTERNAL = 6
} fsm_status;

typedef struct fsm_market fsm_market;
typedef struct fsm_model fsm_model;
typedef struct fsm_report fsm_report;
typedef struct fsm_fit fsm_fit;
typedef struct fsm_simulation fsm_simulation;

FSM_API const char* fsm_version(void);
FSM_API const char* fsm_last_error(void);

/* Market data directory with futures.csv, discount.csv, calendars.csv, quotes.csv. */
FSM_API fsm_status fsm_market_load(const char* dir, int enforce_monotone_discount, fsm_market** out);
FSM_API void fsm_market_free(fsm_market* market);
FSM_API size_t fsm_market_quote_count(const fsm_market* market);

typedef struct fsm_calibration_options {
    int max_iterations;
    double tolerance_bp;
    double threshold_bp;
    int aa_memory;
    double aa_ridge;
    int level_only;          /* 1: ATM level correction only */
    int time_interpolation;  /* 0: total variance linear between pillars, 1: eta^2 linear */
    double eta_min;
    double eta_max;
    int strike_intervals;
    double dt_max;
    double k_max;            /* 0: automatic */
    double concentration;
    int rannacher_steps;
} fsm_calibration_options;

FSM_API void fsm_calibration_options_default(fsm_calibration_options* options);

/* Piecewise-constant mean reversion: n_values = n_breakpoints + 1. On FSM_ERR_NOT_CONVERGED the best
 * iterate is still returned in *model and *report. */
FSM_API fsm_status fsm_calibrate(const fsm_market* market, const double* a_breakpoints, size_t n_breakpoints,
                                 const double* a_values, size_t n_values, const fsm_calibration_options* options,
                                 fsm_model** model, fsm_report** report);

FSM_API int fsm_report_iterations(const fsm_report* report);
FSM_API int fsm_report_converged(const fsm_report* report);
FSM_API double fsm_report_final_max_bp(const fsm_report* report);
FSM_API size_t fsm_report_history_size(const fsm_report* report);
FSM_API fsm_status fsm_report_history(const fsm_report* report, size_t i, double* max_bp, double* rms_bp);
FSM_API size_t fsm_report_wing_atm_pillars(const fsm_report* report);
/* iteration,max_bp,rms_bp,aa_depth,aa_fallback,clipped,damped */
FSM_API fsm_status fsm_report_write_csv(const fsm_report* report, const char* path);
FSM_API void fsm_report_free(fsm_report* report);

FSM_API fsm_status fsm_model_save(const fsm_model* model, const char* path);
FSM_API fsm_status fsm_model_load(const char* path, fsm_model** out);
FSM_API void fsm_model_free(fsm_model* model);
/* Calibrated call surface and density at every quoted expiry: t,k,c,density. */
FSM_API fsm_status fsm_model_dump_surface(const fsm_model* model, const char* path);

/* Year fraction of an ISO date or decimal string relative to the model's valuation date. */
FSM_API fsm_status fsm_model_time(const fsm_model* model, const char* text, double* t);
FSM_API fsm_status fsm_model_contract_t_last(const fsm_model* model, const char* contract, double* t_last);
FSM_API fsm_status fsm_model_forward(const fsm_model* model, double T, double* F0);

/* Vanilla or mid-curve option on `contract` expiring at t. style: 0 future, 1 equity. */
FSM_API fsm_status fsm_price_vanilla(const fsm_model* model, double t, const char* contract, double strike, int style,
                                     int is_put, double* price, double* implied_vol);
/* Future-style calendar spread (near - far - K)^+ expiring at t; implied_vol receives the far-leg
 * quote-metric vol (lesser root) using the near contract's ATM vol. */
FSM_API fsm_status fsm_price_cso(const fsm_model* model, double t, const char* near_contract, const char* far_contract,
                                 double strike, double* price, double* implied_vol);

FSM_API fsm_status fsm_implied_vol(double premium, double t, double F0, double strike, int is_put, double discount,
                                   double* vol);

typedef struct fsm_fit_options {
    double lower;
    double upper;
    double step;
    int refine;
} fsm_fit_options;

FSM_API void fsm_fit_options_default(fsm_fit_options* options);
/* Fits a scalar mean reversion to cso_quotes.csv (expiry,near,far,strike,price). */
FSM_API fsm_status fsm_fit_mean_reversion(const fsm_market* market, const char* cso_quotes_path,
                                          const fsm_fit_options* options, const fsm_calibration_options* calibration,
                                          fsm_fit** out);
FSM_API double fsm_fit_value(const fsm_fit* fit);
FSM_API double fsm_fit_objective(const fsm_fit* fit);
/* expiry,near,far,strike,market_drop, then model_drop_a=<a> per successful grid trial */
FSM_API fsm_status fsm_fit_write_curves(const fsm_fit* fit, const char* path);
/* a,ok,objective,iterations,message */
FSM_API fsm_status fsm_fit_write_trials(const fsm_fit* fit, const char* path);
FSM_API void fsm_fit_free(fsm_fit* fit);

typedef struct fsm_simulation_options {
    double xi;
    double rho_v;
    double rho;      /* loading used for every contract unless rho_values is given */
    const double* rho_maturities;
    const double* rho_values;
    size_t n_rho;
    size_t n_paths;
    uint64_t seed;
    double dt;
} fsm_simulation_options;

FSM_API void fsm_simulation_options_default(fsm_simulation_options* options);
/* Simulates every quoted contract to its quote expiries. */
FSM_API fsm_status fsm_simulate(const fsm_model* model, const fsm_simulation_options* options, fsm_simulation** out);
/* contract,T_last,t,mean,stdev,q01,q05,q25,q50,q75,q95,q99 */
FSM_API fsm_status fsm_simulation_write_terminal(const fsm_simulation* sim, const char* path);
/* t,contract,strike,mean_v2,se_v2,martingale_error,martingale_z,mc_vol,pde_vol,gyongy_gap_bp,se_bp */
FSM_API fsm_status fsm_simulation_write_diagnostics(const fsm_simulation* sim, const char* path);
FSM_API double fsm_simulation_max_gyongy_excess(const fsm_simulation* sim);
FSM_API void fsm_simulation_free(fsm_simulation* sim);

#ifdef __cplusplus
}
#endif

#endif
