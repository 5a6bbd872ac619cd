#include "futsmile/futsmile.h"

#include "futsmile/black.hpp"
#include "futsmile/calibration.hpp"
#include "futsmile/error.hpp"
#include "futsmile/exotics.hpp"
#include "futsmile/model_io.hpp"
#include "futsmile/pricing.hpp"
#include "futsmile/slv.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <memory>
#include <string>

using namespace futsmile;

struct fsm_market {
    MarketData data;
};
struct fsm_model {
    std::shared_ptr<const CalibratedSpotModel> model;
};
struct fsm_report {
    CalibrationReport data;
};
struct fsm_fit {
    MeanReversionFit data;
    std::vector<CsoQuote> quotes;
};
struct fsm_simulation {
    std::shared_ptr<const CalibratedSpotModel> model;
    std::vector<std::string> contracts;
    std::vector<double> t_last;
    std::unique_ptr<PathEnsemble> paths;
};

namespace {

thread_local std::string g_last_error;

fsm_status status_of(ErrorCode code) {
    switch (code) {
        case ErrorCode::io:
            return FSM_ERR_IO;
        case ErrorCode::not_converged:
            return FSM_ERR_NOT_CONVERGED;
        case ErrorCode::numerical:
            return FSM_ERR_NUMERICAL;
        case ErrorCode::schema:
        case ErrorCode::unsupported:
            return FSM_ERR_SCHEMA;
        case ErrorCode::parse:
        case ErrorCode::invalid_input:
        case ErrorCode::date_order:
        case ErrorCode::out_of_range:
        case ErrorCode::arbitrage:
            return FSM_ERR_INVALID;
    }
    return FSM_ERR_INTERNAL;
}

template <class F>
fsm_status guarded(F&& f) {
    try {
        g_last_error.clear();
        return f();
    } catch (const Error& e) {
        g_last_error = e.what();
        return status_of(e.code());
    } catch (const std::bad_alloc&) {
        g_last_error = "out of memory";
        return FSM_ERR_INTERNAL;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return FSM_ERR_INTERNAL;
    }
}

fsm_status invalid(const char* what) {
    g_last_error = what;
    return FSM_ERR_INVALID;
}

std::ofstream open_out(const char* path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorCode::io, std::string("cannot write ") + path);
    out << std::setprecision(17);
    return out;
}

CalibrationConfig to_config(const fsm_calibration_options* o) {
    CalibrationConfig c;
    if (!o) return c;
    c.max_iterations = o->max_iterations;
    c.tolerance_bp = o->tolerance_bp;
    c.threshold_bp = o->threshold_bp;
    if (o->aa_memory < 0) fail(ErrorCode::invalid_input, "Anderson memory must be non-negative");
    c.aa_memory = static_cast<std::size_t>(o->aa_memory);
    c.aa_ridge = o->aa_ridge;
    c.rule = o->level_only ? UpdateRule::level_only : UpdateRule::level_and_skew;
    c.time_interpolation = o->time_interpolation == 1 ? TimeInterpolation::local_variance : TimeInterpolation::total_variance;
    c.bounds = LocalVolBounds{o->eta_min, o->eta_max};
    if (!(c.bounds.min > 0.0) || !(c.bounds.max > c.bounds.min)) fail(ErrorCode::invalid_input, "need 0 < eta_min < eta_max");
    c.grid.strike_intervals = o->strike_intervals;
    c.grid.dt_max = o->dt_max;
    c.grid.k_max = o->k_max;
    c.grid.concentration = o->concentration;
    c.grid.rannacher_steps = o->rannacher_steps;
    return c;
}

double atm_vol(const CalibratedSpotModel& m, double t, double T) {
    const double F0 = m.curve()(T);
    return implied_vol_from_price(price_vanilla_future_style(m, t, T, F0), t, F0, F0);
}

}  // namespace

extern "C" {

const char* fsm_version(void) { return "0.1.0"; }

const char* fsm_last_error(void) { return g_last_error.c_str(); }

fsm_status fsm_market_load(const char* dir, int enforce_monotone_discount, fsm_market** out) {
    if (!dir || !out) return invalid("null argument");
    return guarded([&] {
        auto m = std::make_unique<fsm_market>();
        m->data = load_market(dir, LoadOptions{enforce_monotone_discount != 0});
        *out = m.release();
        return FSM_OK;
    });
}

void fsm_market_free(fsm_market* market) { delete market; }

size_t fsm_market_quote_count(const fsm_market* market) { return market ? market->data.quotes.rows.size() : 0; }

void fsm_calibration_options_default(fsm_calibration_options* o) {
    if (!o) return;
    const CalibrationConfig c;
    o->max_iterations = c.max_iterations;
    o->tolerance_bp = c.tolerance_bp;
    o->threshold_bp = c.threshold_bp;
    o->aa_memory = static_cast<int>(c.aa_memory);
    o->aa_ridge = c.aa_ridge;
    o->level_only = 0;
    o->time_interpolation = 0;
    o->eta_min = c.bounds.min;
    o->eta_max = c.bounds.max;
    o->strike_intervals = c.grid.strike_intervals;
    o->dt_max = c.grid.dt_max;
    o->k_max = c.grid.k_max;
    o->concentration = c.grid.concentration;
    o->rannacher_steps = c.grid.rannacher_steps;
}

fsm_status fsm_calibrate(const fsm_market* market, const double* a_breakpoints, size_t n_breakpoints,
                         const double* a_values, size_t n_values, const fsm_calibration_options* options,
                         fsm_model** model, fsm_report** report) {
    if (!market || !model || !report || (!a_values && n_values > 0) || (!a_breakpoints && n_breakpoints > 0))
        return invalid("null argument");
    return guarded([&] {
        MeanReversion a(std::vector<double>(a_breakpoints, a_breakpoints + n_breakpoints),
                        std::vector<double>(a_values, a_values + n_values));
        auto result = calibrate(market->data, a, to_config(options));
        const bool converged = result.report.converged;
        *model = new fsm_model{std::make_shared<const CalibratedSpotModel>(std::move(result.model))};
        *report = new fsm_report{std::move(result.report)};
        if (!converged) {
            g_last_error = "calibration did not reach the error threshold (best iterate " +
                           std::to_string((*report)->data.final_max_bp) + " bp)";
            return FSM_ERR_NOT_CONVERGED;
        }
        return FSM_OK;
    });
}

int fsm_report_iterations(const fsm_report* r) { return r ? r->data.iterations : -1; }
int fsm_report_converged(const fsm_report* r) { return r && r->data.converged ? 1 : 0; }
double fsm_report_final_max_bp(const fsm_report* r) { return r ? r->data.final_max_bp : std::numeric_limits<double>::quiet_NaN(); }
size_t fsm_report_history_size(const fsm_report* r) { return r ? r->data.history.size() : 0; }
size_t fsm_report_wing_atm_pillars(const fsm_report* r) { return r ? r->data.wing_atm_pillars.size() : 0; }

fsm_status fsm_report_history(const fsm_report* r, size_t i, double* max_bp, double* rms_bp) {
    if (!r || i >= r->data.history.size()) return invalid("history index out of range");
    if (max_bp) *max_bp = r->data.history[i].max_bp;
    if (rms_bp) *rms_bp = r->data.history[i].rms_bp;
    return FSM_OK;
}

fsm_status fsm_report_write_csv(const fsm_report* r, const char* path) {
    if (!r || !path) return invalid("null argument");
    return guarded([&] {
        auto out = open_out(path);
        out << "iteration,max_bp,rms_bp,aa_depth,aa_fallback,clipped,damped\n";
        for (const auto& h : r->data.history) {
            out << h.iteration << "," << h.max_bp << "," << h.rms_bp << "," << h.aa_depth << "," << (h.aa_fallback ? 1 : 0)
                << "," << h.clipped << "," << (h.damped ? 1 : 0) << "\n";
        }
        return FSM_OK;
    });
}

void fsm_report_free(fsm_report* r) { delete r; }

fsm_status fsm_model_save(const fsm_model* m, const char* path) {
    if (!m || !path) return invalid("null argument");
    return guarded([&] {
        save_model(*m->model, path);
        return FSM_OK;
    });
}

fsm_status fsm_model_load(const char* path, fsm_model** out) {
    if (!path || !out) return invalid("null argument");
    return guarded([&] {
        *out = new fsm_model{std::make_shared<const CalibratedSpotModel>(load_model(path))};
        return FSM_OK;
    });
}

void fsm_model_free(fsm_model* m) { delete m; }

fsm_status fsm_model_dump_surface(const fsm_model* m, const char* path) {
    if (!m || !path) return invalid("null argument");
    return guarded([&] {
        auto out = open_out(path);
        out << "t,k,c,density\n";
        const auto& calls = m->model->calls();
        for (double t : CalibratedSpotModel::required_times(m->model->market(), m->model->local_vol())) {
            const auto slice = density_slice(calls, t, std::numeric_limits<double>::infinity());
            const auto c = calls.slice(static_cast<std::size_t>(calls.node_index(t)));
            for (std::size_t i = 0; i < slice.k.size(); ++i) out << t << "," << slice.k[i] << "," << c[i + 1] << "," << slice.density[i] << "\n";
        }
        return FSM_OK;
    });
}

fsm_status fsm_model_time(const fsm_model* m, const char* text, double* t) {
    if (!m || !text || !t) return invalid("null argument");
    return guarded([&] {
        *t = parse_time(text, m->model->market().valuation_date, "time");
        return FSM_OK;
    });
}

fsm_status fsm_model_contract_t_last(const fsm_model* m, const char* contract, double* t_last) {
    if (!m || !contract || !t_last) return invalid("null argument");
    return guarded([&] {
        *t_last = m->model->market().t_last(contract);
        return FSM_OK;
    });
}

fsm_status fsm_model_forward(const fsm_model* m, double T, double* F0) {
    if (!m || !F0) return invalid("null argument");
    return guarded([&] {
        *F0 = m->model->curve()(T);
        return FSM_OK;
    });
}

fsm_status fsm_price_vanilla(const fsm_model* m, double t, const char* contract, double strike, int style, int is_put,
                             double* price, double* implied_vol) {
    if (!m || !contract || !price) return invalid("null argument");
    return guarded([&] {
        const auto& model = *m->model;
        const auto& market = model.market();
        const double T = market.t_last(contract);
        const double Tp = market.time_of(market.contract(contract).payment_date());
        const OptionType type = is_put ? OptionType::put : OptionType::call;
        const MarginStyle ms = style == 1 ? MarginStyle::equity : MarginStyle::future;
        *price = price_vanilla(model, t, T, strike, ms, Tp, type);
        if (implied_vol) {
            const double df = ms == MarginStyle::equity ? market.discount.df(Tp) : 1.0;
            const double F0 = model.curve()(T);
            *implied_vol = strike > 0.0 ? implied_vol_from_price(*price, t, F0, strike, type, df)
                                        : std::numeric_limits<double>::quiet_NaN();
        }
        return FSM_OK;
    });
}

fsm_status fsm_price_cso(const fsm_model* m, double t, const char* near_contract, const char* far_contract, double strike,
                         double* price, double* implied_vol) {
    if (!m || !near_contract || !far_contract || !price) return invalid("null argument");
    return guarded([&] {
        const auto& model = *m->model;
        const double T1 = model.market().t_last(near_contract);
        const double T2 = model.market().t_last(far_contract);
        *price = price_cso_closed_form(model, t, T1, T2, strike);
        if (implied_vol) {
            const double s1 = atm_vol(model, t, T1);
            *implied_vol = cso_quote_metric(model.curve()(T1), model.curve()(T2), t, strike, s1, *price);
        }
        return FSM_OK;
    });
}

fsm_status fsm_implied_vol(double premium, double t, double F0, double strike, int is_put, double discount, double* vol) {
    if (!vol) return invalid("null argument");
    return guarded([&] {
        *vol = implied_vol_from_price(premium, t, F0, strike, is_put ? OptionType::put : OptionType::call, discount);
        return FSM_OK;
    });
}

void fsm_fit_options_default(fsm_fit_options* o) {
    if (!o) return;
    const MeanReversionFitConfig c;
    o->lower = c.lower;
    o->upper = c.upper;
    o->step = c.step;
    o->refine = c.refine ? 1 : 0;
}

fsm_status fsm_fit_mean_reversion(const fsm_market* market, const char* cso_quotes_path, const fsm_fit_options* options,
                                  const fsm_calibration_options* calibration, fsm_fit** out) {
    if (!market || !cso_quotes_path || !out) return invalid("null argument");
    return guarded([&] {
        MeanReversionFitConfig cfg;
        if (options) {
            cfg.lower = options->lower;
            cfg.upper = options->upper;
            cfg.step = options->step;
            cfg.refine = options->refine != 0;
        }
        cfg.calibration = to_config(calibration);
        auto fit = std::make_unique<fsm_fit>();
        fit->quotes = load_cso_quotes(cso_quotes_path, market->data);
        fit->data = fit_mean_reversion(market->data, fit->quotes, cfg);
        *out = fit.release();
        return FSM_OK;
    });
}

double fsm_fit_value(const fsm_fit* f) { return f ? f->data.a : std::numeric_limits<double>::quiet_NaN(); }
double fsm_fit_objective(const fsm_fit* f) { return f ? f->data.objective : std::numeric_limits<double>::quiet_NaN(); }

fsm_status fsm_fit_write_curves(const fsm_fit* f, const char* path) {
    if (!f || !path) return invalid("null argument");
    return guarded([&] {
        auto out = open_out(path);
        std::vector<const MeanReversionTrial*> ok;
        for (std::size_t i = 0; i < f->data.grid_trials; ++i) {
            if (f->data.trials[i].ok) ok.push_back(&f->data.trials[i]);
        }
        out << "expiry,near,far,strike,market_drop";
        for (const auto* t : ok) out << ",model_drop_a=" << t->a;
        out << "\n";
        // Market drops from the trial closest to the fitted value.
        const MeanReversionTrial* ref = nullptr;
        for (const auto& t : f->data.trials) {
            if (t.ok && (!ref || std::abs(t.a - f->data.a) < std::abs(ref->a - f->data.a))) ref = &t;
        }
        for (std::size_t q = 0; q < f->quotes.size(); ++q) {
            const auto& cq = f->quotes[q];
            out << cq.expiry << "," << cq.near << "," << cq.far << "," << cq.strike << "," << (ref ? ref->market_drops[q] : 0.0);
            for (const auto* t : ok) out << "," << t->model_drops[q];
            out << "\n";
        }
        return FSM_OK;
    });
}

fsm_status fsm_fit_write_trials(const fsm_fit* f, const char* path) {
    if (!f || !path) return invalid("null argument");
    return guarded([&] {
        auto out = open_out(path);
        out << "a,ok,objective,iterations,message\n";
        for (const auto& t : f->data.trials) {
            std::string msg = t.message;
            std::replace(msg.begin(), msg.end(), ',', ';');
            out << t.a << "," << (t.ok ? 1 : 0) << "," << t.objective << "," << t.calibration_iterations << "," << msg << "\n";
        }
        return FSM_OK;
    });
}

void fsm_fit_free(fsm_fit* f) { delete f; }

void fsm_simulation_options_default(fsm_simulation_options* o) {
    if (!o) return;
    const SlvParams p;
    o->xi = p.xi;
    o->rho_v = p.rho_v;
    o->rho = 1.0;
    o->rho_maturities = nullptr;
    o->rho_values = nullptr;
    o->n_rho = 0;
    o->n_paths = 10000;
    o->seed = 1;
    o->dt = p.dt;
}

fsm_status fsm_simulate(const fsm_model* m, const fsm_simulation_options* o, fsm_simulation** out) {
    if (!m || !o || !out) return invalid("null argument");
    if (o->n_rho > 0 && (!o->rho_maturities || !o->rho_values)) return invalid("null rho arrays");
    return guarded([&] {
        SlvParams p;
        p.xi = o->xi;
        p.rho_v = o->rho_v;
        p.dt = o->dt;
        if (o->n_rho > 0) {
            p.rho_maturities.assign(o->rho_maturities, o->rho_maturities + o->n_rho);
            p.rho_values.assign(o->rho_values, o->rho_values + o->n_rho);
        } else {
            p.rho_maturities = {0.0};
            p.rho_values = {o->rho};
        }
        auto sim = std::make_unique<fsm_simulation>();
        sim->model = m->model;
        const SlvModel slv(m->model, p);
        SimulationRequest req;
        req.n_paths = o->n_paths;
        req.seed = o->seed;
        const auto& market = m->model->market();
        std::map<std::string, double> contracts;
        for (const auto& q : market.quotes.rows) {
            contracts.emplace(q.contract, q.t_last);
            req.monitor_times.push_back(q.expiry);
        }
        for (const auto& [id, T] : contracts) {
            sim->contracts.push_back(id);
            sim->t_last.push_back(T);
            req.pillars.push_back(T);
        }
        sim->paths = std::make_unique<PathEnsemble>(simulate_paths(slv, req));
        *out = sim.release();
        return FSM_OK;
    });
}

fsm_status fsm_simulation_write_terminal(const fsm_simulation* s, const char* path) {
    if (!s || !path) return invalid("null argument");
    return guarded([&] {
        auto out = open_out(path);
        out << "contract,T_last,t,mean,stdev,q01,q05,q25,q50,q75,q95,q99\n";
        const auto& paths = *s->paths;
        const auto& market = s->model->market();
        for (std::size_t p = 0; p < s->contracts.size(); ++p) {
            // Last quoted expiry of this contract.
            double t = 0.0;
            for (const auto& q : market.quotes.rows) {
                if (q.contract == s->contracts[p]) t = std::max(t, q.expiry);
            }
            std::vector<double> x(paths.futures(paths.monitor_index(t), p).begin(), paths.futures(paths.monitor_index(t), p).end());
            double sum = 0.0, ss = 0.0;
            for (double v : x) {
                sum += v;
                ss += v * v;
            }
            const double n = static_cast<double>(x.size());
            const double mean = sum / n;
            const double sd = std::sqrt(std::max(ss / n - mean * mean, 0.0));
            std::sort(x.begin(), x.end());
            auto q = [&](double level) { return x[static_cast<std::size_t>(std::floor(level * (n - 1)))]; };
            out << s->contracts[p] << "," << s->t_last[p] << "," << t << "," << mean << "," << sd << "," << q(0.01) << ","
                << q(0.05) << "," << q(0.25) << "," << q(0.5) << "," << q(0.75) << "," << q(0.95) << "," << q(0.99) << "\n";
        }
        return FSM_OK;
    });
}

namespace {

struct GyongyRow {
    double t, K, mean_v2, se_v2, mart_err, mart_z, mc_vol, pde_vol, gap_bp, se_bp;
    std::string contract;
};

std::vector<GyongyRow> gyongy_rows(const fsm_simulation& s) {
    const auto& model = *s.model;
    const auto& paths = *s.paths;
    std::vector<GyongyRow> rows;
    for (const auto& q : model.market().quotes.rows) {
        const std::size_t m = paths.monitor_index(q.expiry);
        const std::size_t p = paths.pillar_index(q.t_last);
        const auto diag = paths.diagnostics(m);
        const McPrice mc = mc_price_vanilla(paths, q.expiry, q.t_last, q.strike);
        const double F0 = model.curve()(q.t_last);
        const double pde_price = price_vanilla_future_style(model, q.expiry, q.t_last, q.strike);
        const double pde_vol = implied_vol_from_price(pde_price, q.expiry, F0, q.strike);
        const auto mc_vol = black::try_implied_vol(mc.price / F0, q.expiry, q.strike / F0);
        const double vega = F0 * black::vega(q.expiry, q.strike / F0, pde_vol);
        GyongyRow r;
        r.t = q.expiry;
        r.K = q.strike;
        r.contract = q.contract;
        r.mean_v2 = diag.mean_v2;
        r.se_v2 = diag.se_v2;
        r.mart_err = diag.martingale_error[p];
        r.mart_z = diag.martingale_z[p];
        r.mc_vol = mc_vol.value_or(std::numeric_limits<double>::quiet_NaN());
        r.pde_vol = pde_vol;
        r.gap_bp = (r.mc_vol - pde_vol) * 1e4;
        r.se_bp = vega > 0.0 ? mc.se / vega * 1e4 : std::numeric_limits<double>::infinity();
        rows.push_back(r);
    }
    return rows;
}

}  // namespace

fsm_status fsm_simulation_write_diagnostics(const fsm_simulation* s, const char* path) {
    if (!s || !path) return invalid("null argument");
    return guarded([&] {
        auto out = open_out(path);
        out << "t,contract,strike,mean_v2,se_v2,martingale_error,martingale_z,mc_vol,pde_vol,gyongy_gap_bp,se_bp\n";
        for (const auto& r : gyongy_rows(*s)) {
            out << r.t << "," << r.contract << "," << r.K << "," << r.mean_v2 << "," << r.se_v2 << "," << r.mart_err << ","
                << r.mart_z << "," << r.mc_vol << "," << r.pde_vol << "," << r.gap_bp << "," << r.se_bp << "\n";
        }
        return FSM_OK;
    });
}

double fsm_simulation_max_gyongy_excess(const fsm_simulation* s) {
    if (!s) return std::numeric_limits<double>::quiet_NaN();
    try {
        double worst = -std::numeric_limits<double>::infinity();
        for (const auto& r : gyongy_rows(*s)) {
            const double excess = std::isfinite(r.gap_bp) ? std::abs(r.gap_bp) - std::max(3.0 * r.se_bp, 5.0)
                                                          : std::numeric_limits<double>::infinity();
            worst = std::max(worst, excess);
        }
        return worst;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return std::numeric_limits<double>::quiet_NaN();
    }
}

void fsm_simulation_free(fsm_simulation* s) { delete s; }

}  // extern "C"
