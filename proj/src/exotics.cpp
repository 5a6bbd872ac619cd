#include "futsmile/exotics.hpp"

#include "futsmile/black.hpp"
#include "futsmile/error.hpp"

#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace futsmile {

namespace {

// Phi(b) - Phi(a) for a <= b, evaluated on the side that avoids cancellation.
double phi_diff(double a, double b) {
    if (a >= b) return 0.0;
    if (a > 0.0) return black::norm_cdf(-a) - black::norm_cdf(-b);
    return black::norm_cdf(b) - black::norm_cdf(a);
}

double find_root(const std::function<double(double)>& f, double lo, double hi) {
    std::uintmax_t iters = 200;
    const auto tol = boost::math::tools::eps_tolerance<double>(50);
    const auto r = boost::math::tools::toms748_solve(f, lo, hi, tol, iters);
    return 0.5 * (r.first + r.second);
}

}  // namespace

double price_mco(const CalibratedSpotModel& model, double T_e, double T, double K, MarginStyle style, double T_p,
                 OptionType type) {
    if (!(T_e < T)) fail(ErrorCode::invalid_input, "mid-curve expiry must precede the contract T^last");
    return price_vanilla(model, T_e, T, K, style, T_p, type);
}

CsoCoefficients cso_coefficients(const MeanReversion& a, double F01, double F02, double T_e, double T1, double T2, double K) {
    if (T_e > std::min(T1, T2)) fail(ErrorCode::invalid_input, "spread option expiry after a leg's T^last");
    CsoCoefficients out;
    out.A = F01 * std::exp(-a.integral(T_e, T1)) - F02 * std::exp(-a.integral(T_e, T2));
    if (std::abs(out.A) < 1e-12 * F01) {
        out.A = 0.0;
        out.kind = CsoCase::degenerate;
        return out;
    }
    out.B = 1.0 + (K - F01 + F02) / out.A;
    if (out.A > 0.0) {
        out.kind = out.B > 0.0 ? CsoCase::a_pos_b_pos : CsoCase::a_pos_b_nonpos;
    } else {
        out.kind = out.B > 0.0 ? CsoCase::a_neg_b_pos : CsoCase::a_nonpos_b_nonpos;
    }
    return out;
}

double cso_from_calls(const CsoCoefficients& coef, const std::function<double(double)>& c, double F01, double F02, double K) {
    switch (coef.kind) {
        case CsoCase::degenerate:
            return std::max(F01 - F02 - K, 0.0);
        case CsoCase::a_pos_b_pos:
            return coef.A * c(coef.B);
        case CsoCase::a_pos_b_nonpos:
            return coef.A * (1.0 - coef.B);
        case CsoCase::a_neg_b_pos:
            // Put by parity; far out of the money the difference can round below zero.
            return -coef.A * std::max(c(coef.B) + coef.B - 1.0, 0.0);
        case CsoCase::a_nonpos_b_nonpos:
            return 0.0;
    }
    return 0.0;
}

double price_cso_closed_form(const CalibratedSpotModel& model, double T_e, double T1, double T2, double K) {
    const double F01 = model.curve()(T1);
    const double F02 = model.curve()(T2);
    const auto coef = cso_coefficients(model.mean_reversion(), F01, F02, T_e, T1, T2, K);
    return cso_from_calls(coef, [&](double k) { return model.normalized_call(T_e, k); }, F01, F02, K);
}

double cso_metric_price(double F01, double F02, double T_e, double K, double s1, double s2) {
    if (!(T_e > 0.0) || s1 < 0.0 || s2 < 0.0) fail(ErrorCode::invalid_input, "spread metric needs positive expiry and non-negative vols");
    const double u1 = s1 * std::sqrt(T_e);
    const double u2 = s2 * std::sqrt(T_e);
    const double a1 = F01 * std::exp(-0.5 * u1 * u1);
    const double a2 = F02 * std::exp(-0.5 * u2 * u2);
    auto g = [&](double x) { return a1 * std::exp(-u1 * x) - a2 * std::exp(-u2 * x) - K; };

    // g has at most one stationary point, so at most two roots.
    const double L = 12.0 + std::max(u1, u2);
    std::vector<double> cuts{-L};
    if (u1 != u2 && u1 > 0.0 && u2 > 0.0) {
        const double xs = std::log((u1 * a1) / (u2 * a2)) / (u1 - u2);
        if (xs > -L && xs < L) cuts.push_back(xs);
    }
    cuts.push_back(L);
    std::vector<double> roots;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        const double lo = cuts[i];
        const double hi = cuts[i + 1];
        const double glo = g(lo);
        const double ghi = g(hi);
        if (glo == 0.0) {
            roots.push_back(lo);
        } else if (glo * ghi < 0.0) {
            roots.push_back(find_root(g, lo, hi));
        }
    }
    std::sort(roots.begin(), roots.end());
    roots.erase(std::unique(roots.begin(), roots.end()), roots.end());

    std::vector<double> edges{-std::numeric_limits<double>::infinity()};
    edges.insert(edges.end(), roots.begin(), roots.end());
    edges.push_back(std::numeric_limits<double>::infinity());
    double price = 0.0;
    for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
        const double lo = edges[i];
        const double hi = edges[i + 1];
        const double probe = std::isinf(lo) ? (std::isinf(hi) ? 0.0 : std::min(hi - 1.0, -L)) : (std::isinf(hi) ? std::max(lo + 1.0, L) : 0.5 * (lo + hi));
        if (!(g(probe) > 0.0)) continue;
        price += F01 * phi_diff(lo + u1, hi + u1) - F02 * phi_diff(lo + u2, hi + u2) - K * phi_diff(lo, hi);
    }
    return std::max(price, 0.0);
}

CsoMetricRoots cso_quote_metric_roots(double F01, double F02, double T_e, double K, double s1, double price, double upper) {
    if (!(price >= 0.0)) fail(ErrorCode::invalid_input, "spread price must be non-negative");
    auto h = [&](double s2) { return cso_metric_price(F01, F02, T_e, K, s1, s2) - price; };
    constexpr int kScan = 1000;
    CsoMetricRoots out;
    double prev_s = 1e-8;
    double prev_h = h(prev_s);
    if (prev_h == 0.0) out.roots.push_back(prev_s);
    for (int i = 1; i <= kScan; ++i) {
        const double s = upper * static_cast<double>(i) / kScan;
        const double v = h(s);
        if (v == 0.0) {
            out.roots.push_back(s);
        } else if (prev_h * v < 0.0) {
            out.roots.push_back(find_root(h, prev_s, s));
        }
        prev_s = s;
        prev_h = v;
    }
    if (out.roots.empty()) {
        // A price at the minimum of the metric is a double root that no sign change reveals.
        double best_s = 1e-8, best_h = std::abs(h(best_s));
        for (int i = 1; i <= kScan; ++i) {
            const double s = upper * static_cast<double>(i) / kScan;
            if (const double v = std::abs(h(s)); v < best_h) {
                best_h = v;
                best_s = s;
            }
        }
        const auto [s_min, h_min] = boost::math::tools::brent_find_minima(
            h, std::max(1e-8, best_s - upper / kScan), std::min(upper, best_s + upper / kScan), std::numeric_limits<double>::digits / 2);
        if (std::abs(h_min) <= 1e-8 * std::max({F01, F02, 1.0})) out.roots.push_back(s_min);
    }
    if (out.roots.empty()) {
        std::ostringstream os;
        os << "no far-leg volatility in (0, " << upper << "] reproduces spread price " << price;
        fail(ErrorCode::numerical, os.str());
    }
    std::sort(out.roots.begin(), out.roots.end());
    return out;
}

double cso_quote_metric(double F01, double F02, double T_e, double K, double s1, double price) {
    return cso_quote_metric_roots(F01, F02, T_e, K, s1, price).lesser();
}

std::vector<CsoQuote> load_cso_quotes(const std::filesystem::path& path, const MarketData& market) {
    const CsvTable table = read_csv(path);
    const std::size_t c_exp = table.column("expiry");
    const std::size_t c_near = table.column("near");
    const std::size_t c_far = table.column("far");
    const std::size_t c_k = table.column("strike");
    const std::size_t c_p = table.column("price");
    std::vector<CsoQuote> out;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const std::string where = path.filename().string() + ":" + std::to_string(table.line_numbers[r]);
        CsoQuote q;
        q.expiry = parse_time(row[c_exp], market.valuation_date, where);
        q.near = row[c_near];
        q.far = row[c_far];
        q.strike = parse_double(row[c_k], where);
        q.price = parse_double(row[c_p], where);
        const double t1 = market.t_last(q.near);
        const double t2 = market.t_last(q.far);
        if (!(q.expiry > 0.0) || q.expiry > t1 || t1 > t2) fail(ErrorCode::date_order, where + ": need 0 < expiry <= near T^last <= far T^last");
        if (q.price < 0.0) fail(ErrorCode::invalid_input, where + ": negative spread price");
        out.push_back(std::move(q));
    }
    if (out.empty()) fail(ErrorCode::invalid_input, path.string() + ": no spread quotes");
    return out;
}

DropInputs drop_inputs(const CalibratedSpotModel& model, const CsoQuote& quote) {
    const auto& market = model.market();
    DropInputs in;
    in.T1 = market.t_last(quote.near);
    in.T2 = market.t_last(quote.far);
    in.F01 = model.curve()(in.T1);
    in.F02 = model.curve()(in.T2);
    const double near_price = price_vanilla_future_style(model, quote.expiry, in.T1, in.F01);
    in.sigma_near = implied_vol_from_price(near_price, quote.expiry, in.F01, in.F01);
    const double far_expiry = market.time_of(market.contract(quote.far).option_expiry);
    const double far_price = price_vanilla_future_style(model, far_expiry, in.T2, in.F02);
    in.sigma_far = implied_vol_from_price(far_price, far_expiry, in.F02, in.F02);
    return in;
}

double volatility_drop(const DropInputs& in, const CsoQuote& quote, double price) {
    return in.sigma_far - cso_quote_metric(in.F01, in.F02, quote.expiry, quote.strike, in.sigma_near, price);
}

MeanReversionTrial evaluate_mean_reversion(const MarketData& market, const std::vector<CsoQuote>& quotes, double a,
                                           const CalibrationConfig& config) {
    MeanReversionTrial trial;
    trial.a = a;
    try {
        const MeanReversion mr(a);
        auto result = calibrate(market, mr, config);
        trial.calibration_iterations = result.report.iterations;
        if (!result.report.converged) {
            std::ostringstream os;
            os << "calibration did not converge (max error " << result.report.final_max_bp << " bp)";
            trial.message = os.str();
            return trial;
        }
        double obj = 0.0;
        for (const auto& q : quotes) {
            const DropInputs in = drop_inputs(result.model, q);
            const double model_price = price_cso_closed_form(result.model, q.expiry, in.T1, in.T2, q.strike);
            const double market_drop = volatility_drop(in, q, q.price);
            const double model_drop = volatility_drop(in, q, model_price);
            trial.market_drops.push_back(market_drop);
            trial.model_drops.push_back(model_drop);
            obj += (market_drop - model_drop) * (market_drop - model_drop);
        }
        trial.objective = obj;
        trial.ok = true;
    } catch (const Error& e) {
        trial.message = e.what();
    }
    return trial;
}

MeanReversionFit fit_mean_reversion(const MarketData& market, const std::vector<CsoQuote>& quotes,
                                    const MeanReversionFitConfig& config) {
    if (quotes.empty()) fail(ErrorCode::invalid_input, "mean-reversion fit needs at least one spread quote");
    if (!(config.step > 0.0) || config.upper < config.lower || config.lower < 0.0)
        fail(ErrorCode::invalid_input, "invalid mean-reversion search grid");
    MeanReversionFit fit;
    const auto n = static_cast<int>(std::floor((config.upper - config.lower) / config.step + 1e-9));
    for (int i = 0; i <= n; ++i) {
        const double a = config.lower + config.step * i;
        fit.trials.push_back(evaluate_mean_reversion(market, quotes, a, config.calibration));
    }
    fit.grid_trials = fit.trials.size();
    std::ptrdiff_t best = -1;
    for (std::size_t i = 0; i < fit.trials.size(); ++i) {
        if (fit.trials[i].ok && (best < 0 || fit.trials[i].objective < fit.trials[static_cast<std::size_t>(best)].objective))
            best = static_cast<std::ptrdiff_t>(i);
    }
    if (best < 0) fail(ErrorCode::not_converged, "no trial mean-reversion value could be calibrated");
    fit.a = fit.trials[static_cast<std::size_t>(best)].a;
    fit.objective = fit.trials[static_cast<std::size_t>(best)].objective;
    if (!config.refine) return fit;

    // Golden-section search on the bracket around the best grid point.
    double lo = std::max(config.lower, fit.a - config.step);
    double hi = std::min(config.upper, fit.a + config.step);
    const double ratio = (std::sqrt(5.0) - 1.0) / 2.0;
    auto objective = [&](double a) {
        auto trial = evaluate_mean_reversion(market, quotes, a, config.calibration);
        const double v = trial.ok ? trial.objective : std::numeric_limits<double>::infinity();
        fit.trials.push_back(std::move(trial));
        if (v < fit.objective) {
            fit.objective = v;
            fit.a = a;
        }
        return v;
    };
    double x1 = hi - ratio * (hi - lo);
    double x2 = lo + ratio * (hi - lo);
    double f1 = objective(x1);
    double f2 = objective(x2);
    while (hi - lo > config.refine_tolerance) {
        if (f1 <= f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = objective(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = objective(x2);
        }
    }
    return fit;
}

}  // namespace futsmile
