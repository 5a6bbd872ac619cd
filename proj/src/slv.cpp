#include "futsmile/slv.hpp"

#include "futsmile/error.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace futsmile {

namespace {

constexpr double kTimeEps = 1e-12;

std::vector<double> time_grid(std::vector<double> stops, double dt_max) {
    std::sort(stops.begin(), stops.end());
    std::vector<double> grid{0.0};
    for (double s : stops) {
        const double from = grid.back();
        if (s - from <= kTimeEps) continue;
        const auto steps = static_cast<long>(std::ceil((s - from) / dt_max - 1e-9));
        for (long j = 1; j < steps; ++j) grid.push_back(from + (s - from) * static_cast<double>(j) / static_cast<double>(steps));
        grid.push_back(s);
    }
    return grid;
}

McPrice mean_and_se(double sum, double sum_sq, std::size_t n) {
    const double nn = static_cast<double>(n);
    const double mean = sum / nn;
    const double var = std::max(sum_sq / nn - mean * mean, 0.0) * nn / std::max(nn - 1.0, 1.0);
    return McPrice{mean, std::sqrt(var / nn)};
}

}  // namespace

double instantaneous_correlation(double rho1, double rho2) {
    return rho1 * rho2 + std::sqrt(std::max((1.0 - rho1 * rho1) * (1.0 - rho2 * rho2), 0.0));
}

SlvModel::SlvModel(std::shared_ptr<const CalibratedSpotModel> base, SlvParams params)
    : base_(std::move(base)), params_(std::move(params)) {
    if (!base_) fail(ErrorCode::invalid_input, "SLV model needs a calibrated base model");
    if (!(params_.xi >= 0.0) || !std::isfinite(params_.xi)) fail(ErrorCode::invalid_input, "vol of vol must be non-negative");
    if (!(std::abs(params_.rho_v) <= 1.0 / std::sqrt(2.0) + 1e-15))
        fail(ErrorCode::invalid_input, "spot-vol correlation must satisfy |rho_v| <= 1/sqrt(2)");
    if (params_.rho_maturities.size() != params_.rho_values.size())
        fail(ErrorCode::invalid_input, "rho(T) maturities and values differ in length");
    for (std::size_t i = 0; i < params_.rho_values.size(); ++i) {
        if (!(std::abs(params_.rho_values[i]) <= 1.0)) fail(ErrorCode::invalid_input, "rho(T) must lie in [-1, 1]");
        if (i > 0 && !(params_.rho_maturities[i] > params_.rho_maturities[i - 1]))
            fail(ErrorCode::invalid_input, "rho(T) maturities must be strictly increasing");
    }
    if (!(params_.dt > 0.0)) fail(ErrorCode::invalid_input, "time step must be positive");
    if (params_.block_size == 0) fail(ErrorCode::invalid_input, "block size must be positive");
    if (params_.table_size < 2) fail(ErrorCode::invalid_input, "strike table needs at least two points");
}

double SlvModel::rho(double T) const {
    const auto& x = params_.rho_maturities;
    const auto& y = params_.rho_values;
    if (x.empty()) return 1.0;
    if (T <= x.front()) return std::clamp(y.front(), -1.0, 1.0);
    if (T >= x.back()) return std::clamp(y.back(), -1.0, 1.0);
    const auto i = static_cast<std::size_t>(std::upper_bound(x.begin(), x.end(), T) - x.begin());
    const double w = (T - x[i - 1]) / (x[i] - x[i - 1]);
    return std::clamp((1.0 - w) * y[i - 1] + w * y[i], -1.0, 1.0);
}

double SlvModel::instantaneous_correlation(double T1, double T2) const {
    return futsmile::instantaneous_correlation(rho(T1), rho(T2));
}

PathEnsemble::PathEnsemble(std::vector<double> pillars, std::vector<double> monitor_times, std::vector<double> F0, std::size_t n_paths)
    : pillars_(std::move(pillars)), times_(std::move(monitor_times)), F0_(std::move(F0)), n_(n_paths),
      futures_(times_.size() * pillars_.size() * n_paths), v2_(times_.size() * n_paths) {}

std::size_t PathEnsemble::monitor_index(double t) const {
    for (std::size_t i = 0; i < times_.size(); ++i) {
        if (std::abs(times_[i] - t) <= kTimeEps) return i;
    }
    std::ostringstream os;
    os << "time " << t << " was not monitored";
    fail(ErrorCode::out_of_range, os.str());
}

std::size_t PathEnsemble::pillar_index(double T) const {
    for (std::size_t i = 0; i < pillars_.size(); ++i) {
        if (std::abs(pillars_[i] - T) <= kTimeEps) return i;
    }
    std::ostringstream os;
    os << "maturity " << T << " was not simulated";
    fail(ErrorCode::out_of_range, os.str());
}

std::span<const double> PathEnsemble::futures(std::size_t m, std::size_t p) const {
    return std::span<const double>(futures_).subspan((m * pillars_.size() + p) * n_, n_);
}
std::span<double> PathEnsemble::futures_mut(std::size_t m, std::size_t p) {
    return std::span<double>(futures_).subspan((m * pillars_.size() + p) * n_, n_);
}
std::span<const double> PathEnsemble::variance(std::size_t m) const { return std::span<const double>(v2_).subspan(m * n_, n_); }
std::span<double> PathEnsemble::variance_mut(std::size_t m) { return std::span<double>(v2_).subspan(m * n_, n_); }

MonitorDiagnostics PathEnsemble::diagnostics(std::size_t m) const {
    MonitorDiagnostics d;
    d.t = times_[m];
    double s = 0.0, ss = 0.0;
    for (double v : variance(m)) {
        s += v;
        ss += v * v;
    }
    const McPrice v2 = mean_and_se(s, ss, n_);
    d.mean_v2 = v2.price;
    d.se_v2 = v2.se;
    for (std::size_t p = 0; p < pillars_.size(); ++p) {
        s = 0.0;
        ss = 0.0;
        for (double f : futures(m, p)) {
            s += f - F0_[p];
            ss += (f - F0_[p]) * (f - F0_[p]);
        }
        const McPrice e = mean_and_se(s, ss, n_);
        d.martingale_error.push_back(e.price / F0_[p]);
        d.martingale_z.push_back(e.se > 0.0 ? e.price / e.se : 0.0);
    }
    return d;
}

LeverageEstimator::LeverageEstimator(double bandwidth_scale, std::size_t min_effective)
    : scale_(bandwidth_scale), min_effective_(min_effective) {}

void LeverageEstimator::fit_predict(std::span<const double> x, std::span<const double> y, std::span<double> out) {
    const std::size_t n = x.size();
    if (n == 0) return;
    double lo = x[0], hi = x[0], s = 0.0, ss = 0.0, ys = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        lo = std::min(lo, x[i]);
        hi = std::max(hi, x[i]);
        s += x[i];
        ss += x[i] * x[i];
        ys += y[i];
    }
    const double nn = static_cast<double>(n);
    const double sd = std::sqrt(std::max(ss / nn - (s / nn) * (s / nn), 0.0));
    if (!(hi > lo) || !(sd > 0.0) || n < min_effective_) {
        std::fill(out.begin(), out.end(), ys / nn);
        bandwidth_ = 0.0;
        return;
    }

    // Interquartile range from a coarse histogram.
    constexpr std::size_t kCoarse = 1024;
    count_.assign(kCoarse, 0.0);
    const double cw = (hi - lo) / static_cast<double>(kCoarse);
    for (std::size_t i = 0; i < n; ++i) {
        const auto b = std::min(static_cast<std::size_t>((x[i] - lo) / cw), kCoarse - 1);
        count_[b] += 1.0;
    }
    double q25 = lo, q75 = hi, cum = 0.0;
    bool have25 = false;
    for (std::size_t b = 0; b < kCoarse; ++b) {
        cum += count_[b];
        if (!have25 && cum >= 0.25 * nn) {
            q25 = lo + (static_cast<double>(b) + 0.5) * cw;
            have25 = true;
        }
        if (cum >= 0.75 * nn) {
            q75 = lo + (static_cast<double>(b) + 0.5) * cw;
            break;
        }
    }
    const double iqr = q75 - q25;
    const double spread = iqr > 0.0 ? std::min(sd, iqr / 1.34) : sd;
    const double h = scale_ * 0.9 * spread * std::pow(nn, -0.2);
    bandwidth_ = h;

    // Linear binning onto a grid of spacing h/8.
    std::size_t nb = static_cast<std::size_t>(std::ceil((hi - lo) / (h / 8.0))) + 1;
    nb = std::clamp<std::size_t>(nb, 2, 8192);
    const double w = (hi - lo) / static_cast<double>(nb - 1);
    count_.assign(nb, 0.0);
    sum_.assign(nb, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double u = (x[i] - lo) / w;
        const auto b = std::min(static_cast<std::size_t>(u), nb - 2);
        const double f = u - static_cast<double>(b);
        count_[b] += 1.0 - f;
        count_[b + 1] += f;
        sum_[b] += (1.0 - f) * y[i];
        sum_[b + 1] += f * y[i];
    }
    std::vector<double> prefix(nb + 1, 0.0);
    for (std::size_t b = 0; b < nb; ++b) prefix[b + 1] = prefix[b] + count_[b];

    grid_value_.assign(nb, std::numeric_limits<double>::quiet_NaN());
    const auto nbl = static_cast<long>(nb);
    for (long j = 0; j < nbl; ++j) {
        double hj = h;
        long r = 0;
        for (;;) {
            r = static_cast<long>(std::ceil(hj / w));
            const long a = std::max(0L, j - r);
            const long b = std::min(nbl - 1, j + r);
            const double seen = prefix[static_cast<std::size_t>(b) + 1] - prefix[static_cast<std::size_t>(a)];
            if (seen >= static_cast<double>(min_effective_) || (a == 0 && b == nbl - 1)) break;
            hj *= 1.5;
        }
        double num = 0.0, den = 0.0;
        for (long i = std::max(0L, j - r); i <= std::min(nbl - 1, j + r); ++i) {
            const double u = static_cast<double>(i - j) * w / hj;
            if (u * u >= 1.0) continue;
            const double kw = 1.0 - u * u;
            num += kw * sum_[static_cast<std::size_t>(i)];
            den += kw * count_[static_cast<std::size_t>(i)];
        }
        if (den > 0.0) grid_value_[static_cast<std::size_t>(j)] = num / den;
    }
    // Fill empty grid points from the nearest estimate.
    double last = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t j = 0; j < nb; ++j) {
        if (std::isnan(grid_value_[j])) grid_value_[j] = last;
        else last = grid_value_[j];
    }
    last = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t j = nb; j-- > 0;) {
        if (std::isnan(grid_value_[j])) grid_value_[j] = last;
        else last = grid_value_[j];
    }
    for (std::size_t i = 0; i < n; ++i) {
        const double u = (x[i] - lo) / w;
        const auto b = std::min(static_cast<std::size_t>(u), nb - 2);
        const double f = u - static_cast<double>(b);
        out[i] = (1.0 - f) * grid_value_[b] + f * grid_value_[b + 1];
    }
}

PathEnsemble simulate_paths(const SlvModel& model, const SimulationRequest& request) {
    const auto& base = model.base();
    const auto& params = model.params();
    if (request.pillars.empty()) fail(ErrorCode::invalid_input, "simulation needs at least one futures maturity");
    if (request.monitor_times.empty()) fail(ErrorCode::invalid_input, "simulation needs at least one monitor time");
    if (request.n_paths < 2) fail(ErrorCode::invalid_input, "simulation needs at least two paths");
    std::vector<double> monitors = request.monitor_times;
    std::sort(monitors.begin(), monitors.end());
    monitors.erase(std::unique(monitors.begin(), monitors.end(), [](double a, double b) { return std::abs(a - b) <= kTimeEps; }), monitors.end());
    if (!(monitors.front() > 0.0)) fail(ErrorCode::invalid_input, "monitor times must be positive");
    const double horizon = monitors.back();

    const std::size_t np = request.pillars.size();
    const std::size_t n = request.n_paths;
    std::vector<double> F0(np);
    for (std::size_t p = 0; p < np; ++p) F0[p] = base.curve()(request.pillars[p]);

    std::vector<double> stops = monitors;
    for (double T : request.pillars) {
        if (T < horizon) stops.push_back(T);
    }
    const std::vector<double> grid = time_grid(stops, params.dt);

    PathEnsemble out(request.pillars, monitors, F0, n);
    std::vector<std::vector<double>> F(np);
    for (std::size_t p = 0; p < np; ++p) F[p].assign(n, F0[p]);
    std::vector<double> logv(n, 0.0), v2(n, 1.0), cond(n, 1.0);
    std::vector<double> z1(n), z2(n), z3(n);

    const std::size_t blocks = (n + params.block_size - 1) / params.block_size;
    std::vector<std::mt19937_64> streams;
    streams.reserve(blocks);
    for (std::size_t b = 0; b < blocks; ++b) {
        std::seed_seq seq{static_cast<std::uint32_t>(request.seed & 0xffffffffu), static_cast<std::uint32_t>(request.seed >> 32),
                          static_cast<std::uint32_t>(b)};
        streams.emplace_back(seq);
    }

    // Strike table for eta: the surface is flat outside its node range, so clamping is exact.
    const auto& surface = base.local_vol();
    double k_lo = std::numeric_limits<double>::infinity(), k_hi = -std::numeric_limits<double>::infinity();
    for (const auto& p : surface.pillars()) {
        k_lo = std::min(k_lo, p.k.front());
        k_hi = std::max(k_hi, p.k.back());
    }
    if (!(k_hi > k_lo)) k_hi = k_lo + 1.0;
    const std::size_t nt = params.table_size;
    std::vector<double> table_k(nt), table_eta(nt);
    for (std::size_t i = 0; i < nt; ++i) table_k[i] = k_lo + (k_hi - k_lo) * static_cast<double>(i) / static_cast<double>(nt - 1);
    const double inv_dk = static_cast<double>(nt - 1) / (k_hi - k_lo);
    auto sampler = surface.on_grid(table_k);
    auto eta_at = [&](double k) {
        const double u = (k - k_lo) * inv_dk;
        if (u <= 0.0) return table_eta.front();
        if (u >= static_cast<double>(nt - 1)) return table_eta.back();
        const auto i = static_cast<std::size_t>(u);
        const double f = u - static_cast<double>(i);
        return (1.0 - f) * table_eta[i] + f * table_eta[i + 1];
    };

    const double xi = params.xi;
    const double rv = params.rho_v;
    const double rv3 = std::sqrt(std::max(1.0 - 2.0 * rv * rv, 0.0));
    LeverageEstimator estimator(params.bandwidth_scale, params.min_effective);
    std::vector<double> rho(np);
    for (std::size_t p = 0; p < np; ++p) rho[p] = model.rho(request.pillars[p]);

    std::size_t next_monitor = 0;
    for (std::size_t s = 0; s + 1 < grid.size(); ++s) {
        const double t = grid[s];
        const double dt = grid[s + 1] - t;
        const double t_mid = t + 0.5 * dt;
        const double sq_dt = std::sqrt(dt);

        for (std::size_t b = 0; b < blocks; ++b) {
            std::normal_distribution<double> normal;
            auto& gen = streams[b];
            const std::size_t end = std::min(n, (b + 1) * params.block_size);
            for (std::size_t i = b * params.block_size; i < end; ++i) {
                z1[i] = normal(gen);
                z2[i] = normal(gen);
                z3[i] = normal(gen);
            }
        }
        sampler->fill(t_mid, table_eta);

        for (std::size_t p = 0; p < np; ++p) {
            const double T = request.pillars[p];
            if (t >= T - kTimeEps) continue;
            const double A = base.mean_reversion().integral(t_mid, T);
            const double eA = std::exp(A);
            const double level = F0[p] * -std::expm1(-A);
            const double r1 = rho[p];
            const double r2 = std::sqrt(std::max(1.0 - r1 * r1, 0.0));
            auto& f = F[p];
            if (xi > 0.0) estimator.fit_predict(f, v2, cond);
            for (std::size_t i = 0; i < n; ++i) {
                const double x = f[i];
                if (x <= level) continue;
                const double k = 1.0 - eA * (1.0 - x / F0[p]);
                double nu = (x - level) * eta_at(k);
                if (xi > 0.0) nu *= std::sqrt(v2[i] / cond[i]);
                f[i] = x + nu * sq_dt * (r1 * z1[i] + r2 * z2[i]);
            }
        }

        if (xi > 0.0) {
            const double e1 = std::exp(-dt);
            const double drift = -0.5 * xi * xi * ((1.0 - e1) + std::exp(-(t + dt)) * (std::exp(-t) - std::exp(-t - dt)));
            const double sd = xi * std::sqrt(0.5 * (1.0 - std::exp(-2.0 * dt)));
            for (std::size_t i = 0; i < n; ++i) {
                logv[i] = logv[i] * e1 + drift + sd * (rv * z1[i] + rv * z2[i] + rv3 * z3[i]);
                v2[i] = std::exp(2.0 * logv[i]);
            }
        }

        const double t_next = grid[s + 1];
        while (next_monitor < monitors.size() && std::abs(monitors[next_monitor] - t_next) <= kTimeEps) {
            for (std::size_t p = 0; p < np; ++p) std::copy(F[p].begin(), F[p].end(), out.futures_mut(next_monitor, p).begin());
            std::copy(v2.begin(), v2.end(), out.variance_mut(next_monitor).begin());
            ++next_monitor;
        }
    }
    return out;
}

McPrice mc_price_vanilla(const PathEnsemble& paths, double t, double T, double K) {
    const auto f = paths.futures(paths.monitor_index(t), paths.pillar_index(T));
    double s = 0.0, ss = 0.0;
    for (double x : f) {
        const double v = std::max(x - K, 0.0);
        s += v;
        ss += v * v;
    }
    return mean_and_se(s, ss, f.size());
}

McPrice mc_price_vanilla(const SlvModel& model, double t, double T, double K, std::size_t n_paths, std::uint64_t seed) {
    if (t > T) fail(ErrorCode::invalid_input, "option expiry after contract T^last");
    const auto paths = simulate_paths(model, SimulationRequest{{T}, {t}, n_paths, seed});
    return mc_price_vanilla(paths, t, T, K);
}

McPrice mc_price_cso(const PathEnsemble& paths, double T_e, double T1, double T2, double K) {
    const std::size_t m = paths.monitor_index(T_e);
    const auto f1 = paths.futures(m, paths.pillar_index(T1));
    const auto f2 = paths.futures(m, paths.pillar_index(T2));
    double s = 0.0, ss = 0.0;
    for (std::size_t i = 0; i < f1.size(); ++i) {
        const double v = std::max(f1[i] - f2[i] - K, 0.0);
        s += v;
        ss += v * v;
    }
    return mean_and_se(s, ss, f1.size());
}

McPrice mc_price_cso(const SlvModel& model, double T_e, double T1, double T2, double K, std::size_t n_paths, std::uint64_t seed) {
    if (T_e > std::min(T1, T2)) fail(ErrorCode::invalid_input, "spread expiry after a leg's T^last");
    const auto paths = simulate_paths(model, SimulationRequest{{T1, T2}, {T_e}, n_paths, seed});
    return mc_price_cso(paths, T_e, T1, T2, K);
}

double mc_terminal_correlation(const PathEnsemble& paths, double t, double T1, double T2) {
    const std::size_t m = paths.monitor_index(t);
    const auto a = paths.futures(m, paths.pillar_index(T1));
    const auto b = paths.futures(m, paths.pillar_index(T2));
    const double n = static_cast<double>(a.size());
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double saa = 0.0, sbb = 0.0, sab = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
        sab += (a[i] - ma) * (b[i] - mb);
    }
    if (!(saa > 0.0) || !(sbb > 0.0)) return 1.0;
    return sab / std::sqrt(saa * sbb);
}

}  // namespace futsmile
