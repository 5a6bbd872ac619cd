#include "futsmile/dupire_pde.hpp"

#include "futsmile/error.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace futsmile {

namespace {

constexpr double kTimeEps = 1e-12;

// Strike nodes k = 1 + c sinh(xi), uniform in xi on each side of k = 1.
std::vector<double> sinh_strikes(int intervals, double c, double k_max, std::size_t& atm) {
    const double l_lo = std::asinh(1.0 / c);
    const double l_hi = std::asinh((k_max - 1.0) / c);
    int m_lo = static_cast<int>(std::lround(intervals * l_lo / (l_lo + l_hi)));
    m_lo = std::clamp(m_lo, 2, intervals - 2);
    const int m_hi = intervals - m_lo;
    std::vector<double> k(static_cast<std::size_t>(intervals) + 1);
    for (int i = 0; i <= m_lo; ++i) {
        const double xi = -l_lo + l_lo * i / m_lo;
        k[static_cast<std::size_t>(i)] = 1.0 + c * std::sinh(xi);
    }
    for (int i = 1; i <= m_hi; ++i) {
        const double xi = l_hi * i / m_hi;
        k[static_cast<std::size_t>(m_lo + i)] = 1.0 + c * std::sinh(xi);
    }
    k.front() = 0.0;
    k[static_cast<std::size_t>(m_lo)] = 1.0;
    k.back() = k_max;
    atm = static_cast<std::size_t>(m_lo);
    return k;
}

// Tridiagonal operator L c = lo c_{i-1} + di c_i + up c_{i+1} at interior nodes.
struct Operator {
    std::vector<double> lo, di, up;
};

void assemble(Operator& op, std::span<const double> k, std::span<const double> eta, double a, double peclet_limit) {
    const std::size_t m = k.size() - 1;
    for (std::size_t i = 1; i < m; ++i) {
        const double hm = k[i] - k[i - 1];
        const double hp = k[i + 1] - k[i];
        const double diff = 0.5 * k[i] * k[i] * eta[i] * eta[i];
        const double drift = -a * (1.0 - k[i]);  // coefficient of dc/dk
        double lo = 2.0 * diff / (hm * (hm + hp));
        double up = 2.0 * diff / (hp * (hm + hp));
        double di = -lo - up - a;
        const bool upwind = drift != 0.0 && (diff <= 0.0 || std::abs(drift) * std::max(hm, hp) / diff > peclet_limit);
        if (!upwind) {
            lo += drift * (-hp / (hm * (hm + hp)));
            di += drift * ((hp - hm) / (hm * hp));
            up += drift * (hm / (hp * (hm + hp)));
        } else if (drift > 0.0) {
            di -= drift / hp;
            up += drift / hp;
        } else {
            lo -= drift / hm;
            di += drift / hm;
        }
        op.lo[i] = lo;
        op.di[i] = di;
        op.up[i] = up;
    }
}

// One theta step of length dt on interior nodes, Dirichlet boundaries c_0 = 1, c_M = 0.
void theta_step(const Operator& op, double theta, double dt, std::vector<double>& c, std::vector<double>& rhs,
                std::vector<double>& cp, std::vector<double>& dp) {
    const std::size_t m = c.size() - 1;
    for (std::size_t i = 1; i < m; ++i) {
        const double lc = op.lo[i] * c[i - 1] + op.di[i] * c[i] + op.up[i] * c[i + 1];
        rhs[i] = c[i] + (1.0 - theta) * dt * lc;
    }
    const double left = 1.0;
    const double right = 0.0;
    // Thomas algorithm on rows 1..m-1 of (I - theta dt L).
    for (std::size_t i = 1; i < m; ++i) {
        const double a = -theta * dt * op.lo[i];
        const double b = 1.0 - theta * dt * op.di[i];
        const double u = -theta * dt * op.up[i];
        double r = rhs[i];
        if (i == 1) r -= a * left;
        if (i == m - 1) r -= u * right;
        if (i == 1) {
            cp[i] = u / b;
            dp[i] = r / b;
        } else {
            const double den = b - a * cp[i - 1];
            cp[i] = u / den;
            dp[i] = (r - a * dp[i - 1]) / den;
        }
    }
    c[m - 1] = dp[m - 1];
    for (std::size_t i = m - 1; i-- > 1;) c[i] = dp[i] - cp[i] * c[i + 1];
    c[0] = left;
    c[m] = right;
}

double max_shape_violation(std::span<const double> k, std::span<const double> c) {
    double worst = 0.0;
    double prev_slope = -1.0;
    for (std::size_t i = 0; i + 1 < k.size(); ++i) {
        const double s = (c[i + 1] - c[i]) / (k[i + 1] - k[i]);
        worst = std::max(worst, s);                // monotone non-increasing
        worst = std::max(worst, prev_slope - s);   // convex
        prev_slope = s;
    }
    return worst;
}

}  // namespace

PdeGrid PdeGrid::build(const PdeGridSpec& spec, std::vector<double> required_times, double sigma_max,
                       double max_effective_strike) {
    if (spec.strike_intervals < 8) fail(ErrorCode::invalid_input, "PDE grid needs at least 8 strike intervals");
    if (!(spec.dt_max > 0.0)) fail(ErrorCode::invalid_input, "PDE dt_max must be positive");
    if (!(spec.concentration > 0.0)) fail(ErrorCode::invalid_input, "PDE concentration must be positive");
    if (!(spec.theta >= 0.0 && spec.theta <= 1.0)) fail(ErrorCode::invalid_input, "PDE theta must lie in [0,1]");
    if (required_times.empty()) fail(ErrorCode::invalid_input, "PDE grid needs at least one maturity");
    std::sort(required_times.begin(), required_times.end());
    if (!(required_times.front() > 0.0)) fail(ErrorCode::invalid_input, "PDE maturities must be positive");
    if (!(sigma_max > 0.0)) fail(ErrorCode::invalid_input, "PDE grid needs a positive volatility scale");

    PdeGrid g;
    g.spec_ = spec;
    const double t_max = required_times.back();
    double k_max = spec.k_max;
    if (k_max <= 0.0) {
        k_max = std::max({std::exp(spec.width * sigma_max * std::sqrt(t_max)), 1.0 + spec.width * sigma_max * std::sqrt(t_max), 2.0});
    }
    if (!(k_max > 1.0)) fail(ErrorCode::invalid_input, "PDE k_max must exceed 1");
    g.strikes_ = sinh_strikes(spec.strike_intervals, spec.concentration, k_max, g.atm_);
    while (g.strikes_[g.strikes_.size() - 2] < max_effective_strike) {
        k_max *= 1.5;
        g.strikes_ = sinh_strikes(spec.strike_intervals, spec.concentration, k_max, g.atm_);
    }
    g.spec_.k_max = k_max;

    g.times_.push_back(0.0);
    for (double target : required_times) {
        const double from = g.times_.back();
        if (target - from <= kTimeEps) continue;
        const auto steps = static_cast<long>(std::ceil((target - from) / spec.dt_max - 1e-9));
        for (long j = 1; j < steps; ++j) g.times_.push_back(from + (target - from) * static_cast<double>(j) / static_cast<double>(steps));
        g.times_.push_back(target);
    }
    return g;
}

CallSurface::CallSurface(std::vector<double> times, std::vector<double> strikes, std::vector<double> values)
    : times_(std::move(times)), strikes_(std::move(strikes)), values_(std::move(values)) {
    if (times_.empty() || strikes_.size() < 3 || values_.size() != times_.size() * strikes_.size())
        fail(ErrorCode::invalid_input, "call surface dimensions do not match");
}

std::span<const double> CallSurface::slice(std::size_t n) const {
    return std::span<const double>(values_).subspan(n * strikes_.size(), strikes_.size());
}

long CallSurface::node_index(double t) const {
    const auto it = std::lower_bound(times_.begin(), times_.end(), t - kTimeEps);
    if (it != times_.end() && std::abs(*it - t) <= kTimeEps) return static_cast<long>(it - times_.begin());
    return -1;
}

double CallSurface::interpolate_k(std::size_t n, double k) const {
    const auto& x = strikes_;
    const auto c = slice(n);
    if (k <= 0.0) return 1.0 - k;
    if (k >= x.back()) return 0.0;
    const std::size_t m = x.size() - 1;
    std::size_t i = static_cast<std::size_t>(std::upper_bound(x.begin(), x.end(), k) - x.begin()) - 1;
    i = std::min(i, m - 1);
    auto slope = [&](std::size_t j) {
        if (j == 0) return (c[1] - c[0]) / (x[1] - x[0]);
        if (j == m) return (c[m] - c[m - 1]) / (x[m] - x[m - 1]);
        const double hm = x[j] - x[j - 1];
        const double hp = x[j + 1] - x[j];
        return (-hp / (hm * (hm + hp))) * c[j - 1] + ((hp - hm) / (hm * hp)) * c[j] + (hm / (hp * (hm + hp))) * c[j + 1];
    };
    const double h = x[i + 1] - x[i];
    const double u = (k - x[i]) / h;
    const double h00 = (1.0 + 2.0 * u) * (1.0 - u) * (1.0 - u);
    const double h10 = u * (1.0 - u) * (1.0 - u);
    const double h01 = u * u * (3.0 - 2.0 * u);
    const double h11 = u * u * (u - 1.0);
    return h00 * c[i] + h10 * h * slope(i) + h01 * c[i + 1] + h11 * h * slope(i + 1);
}

double CallSurface::operator()(double t, double k) const {
    if (t <= 0.0 || k <= 0.0) return k <= 0.0 ? 1.0 - k : std::max(1.0 - k, 0.0);
    if (t > times_.back() + kTimeEps) {
        std::ostringstream os;
        os << "time " << t << " beyond PDE horizon " << times_.back();
        fail(ErrorCode::out_of_range, os.str());
    }
    const long node = node_index(t);
    if (node >= 0) return interpolate_k(static_cast<std::size_t>(node), k);
    const auto it = std::upper_bound(times_.begin(), times_.end(), t);
    const auto hi = static_cast<std::size_t>(it - times_.begin());
    const std::size_t lo = hi - 1;
    const double w = (t - times_[lo]) / (times_[hi] - times_[lo]);
    return (1.0 - w) * interpolate_k(lo, k) + w * interpolate_k(hi, k);
}

CallSurface solve_dupire(const LocalVol& eta, const MeanReversion& a, const PdeGrid& grid) {
    const auto k = grid.strikes();
    const auto t = grid.times();
    const auto& spec = grid.spec();
    const std::size_t m = k.size() - 1;
    const std::size_t cols = m + 1;

    std::vector<double> values(t.size() * cols);
    std::vector<double> c(cols);
    for (std::size_t i = 0; i <= m; ++i) c[i] = std::max(1.0 - k[i], 0.0);
    std::copy(c.begin(), c.end(), values.begin());

    auto sampler = eta.on_grid(k);
    std::vector<double> eta_values(cols);
    Operator op{std::vector<double>(cols), std::vector<double>(cols), std::vector<double>(cols)};
    std::vector<double> rhs(cols), cp(cols), dp(cols);

    auto step = [&](double from, double dt, double theta) {
        const double mid = from + 0.5 * dt;
        sampler->fill(mid, eta_values);
        assemble(op, k, eta_values, a(mid), spec.peclet_limit);
        theta_step(op, theta, dt, c, rhs, cp, dp);
    };

    for (std::size_t n = 0; n + 1 < t.size(); ++n) {
        const double dt = t[n + 1] - t[n];
        if (static_cast<int>(n) < spec.rannacher_steps) {
            step(t[n], 0.5 * dt, 1.0);
            step(t[n] + 0.5 * dt, 0.5 * dt, 1.0);
        } else {
            step(t[n], dt, spec.theta);
        }
        for (double v : c) {
            if (!std::isfinite(v)) fail(ErrorCode::numerical, "PDE solution is not finite");
        }
        const double violation = max_shape_violation(k, c);
        if (violation > spec.convexity_tolerance) {
            std::ostringstream os;
            os << "PDE oscillation detected at t=" << t[n + 1] << " (shape violation " << violation << ")";
            fail(ErrorCode::numerical, os.str());
        }
        std::copy(c.begin(), c.end(), values.begin() + static_cast<std::ptrdiff_t>((n + 1) * cols));
    }
    return CallSurface(std::vector<double>(t.begin(), t.end()), std::vector<double>(k.begin(), k.end()), std::move(values));
}

DensitySlice density_slice(const CallSurface& surface, double t, double tolerance) {
    const long node = surface.node_index(t);
    if (node < 0) fail(ErrorCode::out_of_range, "density requested off the PDE time grid");
    const auto k = surface.strikes();
    const auto c = surface.slice(static_cast<std::size_t>(node));
    DensitySlice out;
    out.t = t;
    const std::size_t m = k.size() - 1;
    for (std::size_t i = 1; i < m; ++i) {
        const double hm = k[i] - k[i - 1];
        const double hp = k[i + 1] - k[i];
        const double d2 = 2.0 * (c[i - 1] / (hm * (hm + hp)) - c[i] / (hm * hp) + c[i + 1] / (hp * (hm + hp)));
        const double d1 = (-hp / (hm * (hm + hp))) * c[i - 1] + ((hp - hm) / (hm * hp)) * c[i] + (hm / (hp * (hm + hp))) * c[i + 1];
        if (d2 < -tolerance) {
            std::ostringstream os;
            os << "negative density " << d2 << " at t=" << t << ", k=" << k[i];
            fail(ErrorCode::arbitrage, os.str());
        }
        out.k.push_back(k[i]);
        out.density.push_back(d2);
        out.cdf.push_back(1.0 + d1);
    }
    // Cell masses from slope differences: the slope on [k_i, k_{i+1}] is the CDF minus one there.
    double mass = 0.0;
    double mean = 0.0;
    for (std::size_t i = 1; i < m; ++i) {
        const double s_left = (c[i] - c[i - 1]) / (k[i] - k[i - 1]);
        const double s_right = (c[i + 1] - c[i]) / (k[i + 1] - k[i]);
        mass += s_right - s_left;
        mean += k[i] * (s_right - s_left);
    }
    out.mass = mass;
    out.mean = mean;
    return out;
}

double second_moment(const CallSurface& surface, double t) {
    const long node = surface.node_index(t);
    if (node < 0) fail(ErrorCode::out_of_range, "moment requested off the PDE time grid");
    const auto k = surface.strikes();
    const auto c = surface.slice(static_cast<std::size_t>(node));
    double integral = 0.0;
    for (std::size_t i = 0; i + 1 < k.size(); ++i) integral += 0.5 * (c[i] + c[i + 1]) * (k[i + 1] - k[i]);
    return 2.0 * integral;
}

}  // namespace futsmile
