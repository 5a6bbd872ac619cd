#include "futsmile/calibration.hpp"

#include "futsmile/anderson.hpp"
#include "futsmile/black.hpp"
#include "futsmile/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace futsmile {

namespace {

// Three-point derivative of y(x) at position j; one-sided at the ends.
double node_slope(std::span<const double> x, std::span<const double> y, std::size_t j) {
    const std::size_t n = x.size();
    if (n < 2) return 0.0;
    if (j == 0) return (y[1] - y[0]) / (x[1] - x[0]);
    if (j == n - 1) return (y[n - 1] - y[n - 2]) / (x[n - 1] - x[n - 2]);
    const double hm = x[j] - x[j - 1];
    const double hp = x[j + 1] - x[j];
    return (-hp / (hm * (hm + hp))) * y[j - 1] + ((hp - hm) / (hm * hp)) * y[j] + (hm / (hp * (hm + hp))) * y[j + 1];
}

}  // namespace

QuoteGrid normalize_quotes(const MarketData& market, const MeanReversion& a) {
    const auto& rows = market.quotes.rows;
    if (rows.empty()) fail(ErrorCode::invalid_input, "no option quotes to calibrate");
    std::vector<NormalizedQuote> qs;
    qs.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        NormalizedQuote q;
        q.source = i;
        q.t = r.expiry;
        q.T = r.t_last;
        q.K = r.strike;
        q.F0T = market.futures(r.t_last);
        q.A = a.integral(q.t, q.T);
        q.k = effective_strike(a, q.t, q.T, q.K, q.F0T);
        q.sigma_market = r.vol;
        std::ostringstream where;
        where << "quote " << i + 1 << " (expiry " << q.t << ", contract " << r.contract << ", strike " << q.K << ")";
        if (!(q.k > 0.0)) fail(ErrorCode::invalid_input, where.str() + ": strike at or below the absorbing level");
        // Same premium in normalized units: e^{A} * Black(t, K/F0, sigma).
        const double premium = std::exp(q.A) * black::call(q.t, q.K / q.F0T, q.sigma_market);
        const auto vol = black::try_implied_vol(premium, q.t, q.k);
        if (!vol) fail(ErrorCode::arbitrage, where.str() + ": normalized premium outside the Black band");
        q.sigma_norm = *vol;
        qs.push_back(q);
    }
    std::stable_sort(qs.begin(), qs.end(), [](const NormalizedQuote& x, const NormalizedQuote& y) {
        return x.t < y.t || (x.t == y.t && x.k < y.k);
    });

    QuoteGrid grid;
    grid.quotes = std::move(qs);
    for (std::size_t i = 0; i < grid.quotes.size(); ++i) {
        const auto& q = grid.quotes[i];
        if (grid.pillars.empty() || std::abs(grid.pillars.back().t - q.t) > 1e-12) {
            grid.pillars.push_back(QuotePillar{q.t, {}, 0, false});
        } else if (q.k - grid.quotes[i - 1].k <= 1e-12) {
            std::ostringstream os;
            os << "duplicate effective strike " << q.k << " at expiry " << q.t;
            fail(ErrorCode::invalid_input, os.str());
        }
        grid.pillars.back().quotes.push_back(i);
    }
    for (auto& p : grid.pillars) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < p.quotes.size(); ++j) {
            const double d = std::abs(grid.quotes[p.quotes[j]].k - 1.0);
            if (d < best) {
                best = d;
                p.atm = j;
            }
        }
        const double lo = grid.quotes[p.quotes.front()].k;
        const double hi = grid.quotes[p.quotes.back()].k;
        p.atm_is_wing = p.quotes.size() > 1 && (lo > 1.0 || hi < 1.0);
    }
    return grid;
}

std::vector<double> QuoteGrid::market_nodes() const {
    std::vector<double> out;
    out.reserve(quotes.size());
    for (const auto& q : quotes) out.push_back(q.sigma_norm);
    return out;
}

LocalVolSurface QuoteGrid::surface(TimeInterpolation interpolation, LocalVolBounds bounds,
                                   std::optional<std::vector<double>> nodes) const {
    const std::vector<double> values = nodes ? std::move(*nodes) : market_nodes();
    if (values.size() != quotes.size()) fail(ErrorCode::invalid_input, "node count does not match the quote grid");
    std::vector<LocalVolPillar> pillars;
    for (const auto& p : this->pillars) {
        LocalVolPillar lp;
        lp.t = p.t;
        for (std::size_t idx : p.quotes) {
            lp.k.push_back(quotes[idx].k);
            lp.eta.push_back(std::clamp(values[idx], bounds.min, bounds.max));
        }
        pillars.push_back(std::move(lp));
    }
    return LocalVolSurface(std::move(pillars), interpolation, bounds);
}

QuoteFit evaluate_quotes(const CallSurface& calls, const QuoteGrid& grid) {
    QuoteFit fit;
    const std::size_t n = grid.quotes.size();
    fit.sigma_norm.resize(n);
    fit.sigma_market.resize(n);
    fit.error_bp.resize(n);
    double sum_sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& q = grid.quotes[i];
        const double c = calls(q.t, q.k);
        const auto s_norm = black::try_implied_vol(c, q.t, q.k);
        const auto s_mkt = black::try_implied_vol(std::exp(-q.A) * c, q.t, q.K / q.F0T);
        fit.sigma_norm[i] = s_norm.value_or(std::numeric_limits<double>::quiet_NaN());
        fit.sigma_market[i] = s_mkt.value_or(std::numeric_limits<double>::quiet_NaN());
        const double err = s_mkt ? std::abs(*s_mkt - q.sigma_market) * 1e4 : std::numeric_limits<double>::infinity();
        fit.error_bp[i] = err;
        fit.max_bp = std::max(fit.max_bp, err);
        sum_sq += err * err;
    }
    fit.rms_bp = std::sqrt(sum_sq / static_cast<double>(n));
    return fit;
}

std::vector<double> fixed_point_step(const std::vector<double>& nodes, const QuoteGrid& grid, const QuoteFit& model,
                                     UpdateRule rule) {
    if (nodes.size() != grid.quotes.size() || model.sigma_norm.size() != nodes.size())
        fail(ErrorCode::invalid_input, "fixed-point step sizes do not match");
    std::vector<double> out(nodes.size());
    std::vector<double> k, s_mkt, s_mod;
    for (const auto& p : grid.pillars) {
        k.clear();
        s_mkt.clear();
        s_mod.clear();
        for (std::size_t idx : p.quotes) {
            k.push_back(grid.quotes[idx].k);
            s_mkt.push_back(grid.quotes[idx].sigma_norm);
            // A failed inversion carries no information; treat the node as matched.
            const double m = model.sigma_norm[idx];
            s_mod.push_back(std::isfinite(m) ? m : grid.quotes[idx].sigma_norm);
        }
        const double ratio = s_mkt[p.atm] / s_mod[p.atm];
        for (std::size_t j = 0; j < p.quotes.size(); ++j) {
            const std::size_t idx = p.quotes[j];
            double v = nodes[idx] * ratio;
            if (rule == UpdateRule::level_and_skew && j != p.atm) {
                const double dskew = node_slope(k, s_mkt, j) - node_slope(k, s_mod, j);
                v += 2.0 * dskew * (k[j] - k[p.atm]);
            }
            out[idx] = v;
        }
    }
    return out;
}

int CalibrationReport::iterations_to(double bp) const {
    for (const auto& h : history) {
        if (h.max_bp <= bp) return h.iteration;
    }
    return -1;
}

CalibrationResult calibrate(const MarketData& market, const MeanReversion& a, const CalibrationConfig& config,
                            std::optional<std::vector<double>> initial_nodes) {
    if (config.max_iterations < 0) fail(ErrorCode::invalid_input, "max_iterations must be non-negative");
    const QuoteGrid grid = normalize_quotes(market, a);
    const LocalVolBounds bounds = config.bounds;
    auto clip = [&](std::vector<double>& x) {
        std::size_t clipped = 0;
        for (double& v : x) {
            const double c = std::clamp(v, bounds.min, bounds.max);
            if (c != v || !std::isfinite(v)) ++clipped;
            v = std::isfinite(v) ? c : bounds.max;
        }
        return clipped;
    };

    std::vector<double> x = initial_nodes ? std::move(*initial_nodes) : grid.market_nodes();
    if (x.size() != grid.quotes.size()) fail(ErrorCode::invalid_input, "initial node count does not match the quotes");
    clip(x);

    const LocalVolSurface seed = grid.surface(config.time_interpolation, bounds, x);
    const PdeGrid pde = model_grid(market, a, seed, config.grid);
    AndersonAccelerator aa(config.aa_memory, config.aa_ridge);

    CalibrationReport report;
    std::shared_ptr<const CallSurface> calls;
    QuoteFit fit;
    std::size_t pending_clipped = 0;
    bool pending_damped = false;
    std::size_t pending_depth = 0;
    bool pending_fallback = false;
    std::shared_ptr<const CallSurface> best_calls;
    std::vector<double> best_x;
    QuoteFit best_fit;
    double best_err = std::numeric_limits<double>::infinity();

    for (int it = 0;; ++it) {
        const LocalVolSurface eta = grid.surface(config.time_interpolation, bounds, x);
        calls = std::make_shared<const CallSurface>(solve_dupire(eta, a, pde));
        fit = evaluate_quotes(*calls, grid);
        report.history.push_back(IterationRecord{it, fit.max_bp, fit.rms_bp, pending_depth, pending_fallback, pending_clipped, pending_damped});
        if (fit.max_bp < best_err) {
            best_err = fit.max_bp;
            best_x = x;
            best_calls = calls;
            best_fit = fit;
        }
        report.iterations = it;
        if (fit.max_bp < config.tolerance_bp || it >= config.max_iterations) break;

        const std::vector<double> g = fixed_point_step(x, grid, fit, config.rule);
        std::vector<double> next = aa.next(x, g);
        pending_depth = aa.last_depth();
        pending_fallback = aa.last_fallback();
        std::vector<double> raw = next;
        pending_clipped = clip(next);
        pending_damped = false;
        if (pending_clipped == next.size()) {
            for (std::size_t i = 0; i < next.size(); ++i) next[i] = x[i] + config.clip_damping * (raw[i] - x[i]);
            clip(next);
            pending_damped = true;
        }
        x = std::move(next);
    }

    // A non-converged run returns its best iterate.
    if (fit.max_bp > best_err) {
        x = best_x;
        calls = best_calls;
        fit = best_fit;
    }
    LocalVolSurface eta = grid.surface(config.time_interpolation, bounds, x);
    report.final_nodes = x;
    report.final_errors_bp = fit.error_bp;
    report.final_max_bp = fit.max_bp;
    report.converged = fit.max_bp < config.threshold_bp;
    report.max_strike_slope = eta.max_strike_slope();
    for (const auto& p : grid.pillars) {
        if (p.atm_is_wing) report.wing_atm_pillars.push_back(p.t);
    }
    CalibratedSpotModel model(market, a, std::move(eta), pde.spec(), calls);
    return CalibrationResult{std::move(model), std::move(report)};
}

}  // namespace futsmile
