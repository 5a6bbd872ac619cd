#include "futsmile/local_vol_surface.hpp"

#include "futsmile/error.hpp"

#include <algorithm>
#include <cmath>

namespace futsmile {

namespace {

class PointwiseSampler final : public LocalVolSampler {
public:
    PointwiseSampler(const LocalVol& vol, std::span<const double> k) : vol_(vol), k_(k.begin(), k.end()) {}
    void fill(double t, std::span<double> out) override {
        for (std::size_t i = 0; i < k_.size(); ++i) out[i] = vol_(t, k_[i]);
    }

private:
    const LocalVol& vol_;
    std::vector<double> k_;
};

class SurfaceSampler final : public LocalVolSampler {
public:
    SurfaceSampler(const LocalVolSurface& surface, std::vector<std::vector<double>> tables)
        : surface_(surface), tables_(std::move(tables)) {}

    void fill(double t, std::span<double> out) override {
        const auto b = surface_.blend(t);
        const auto& lo = tables_[b.lo];
        const auto& hi = tables_[b.hi];
        if (b.w == 0.0) {
            std::copy(lo.begin(), lo.end(), out.begin());
        } else if (b.w == 1.0) {
            std::copy(hi.begin(), hi.end(), out.begin());
        } else {
            for (std::size_t i = 0; i < out.size(); ++i)
                out[i] = std::sqrt((1.0 - b.w) * lo[i] * lo[i] + b.w * hi[i] * hi[i]);
        }
    }

private:
    const LocalVolSurface& surface_;
    std::vector<std::vector<double>> tables_;
};

}  // namespace

std::unique_ptr<LocalVolSampler> LocalVol::on_grid(std::span<const double> k) const {
    return std::make_unique<PointwiseSampler>(*this, k);
}

MonotoneCubic::MonotoneCubic(std::vector<double> x, std::vector<double> y) : x_(std::move(x)), y_(std::move(y)) {
    const std::size_t n = x_.size();
    if (n == 0 || y_.size() != n) fail(ErrorCode::invalid_input, "monotone cubic needs matching non-empty nodes");
    for (std::size_t i = 1; i < n; ++i)
        if (!(x_[i] > x_[i - 1])) fail(ErrorCode::invalid_input, "interpolation nodes must be strictly increasing");
    d_.assign(n, 0.0);
    if (n == 1) return;
    std::vector<double> h(n - 1), delta(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        h[i] = x_[i + 1] - x_[i];
        delta[i] = (y_[i + 1] - y_[i]) / h[i];
    }
    if (n == 2) {
        d_[0] = d_[1] = delta[0];
        return;
    }
    // Interior slopes: weighted harmonic mean (Fritsch-Butland), zero at local extrema.
    for (std::size_t i = 1; i + 1 < n; ++i) {
        if (delta[i - 1] * delta[i] <= 0.0) {
            d_[i] = 0.0;
        } else {
            const double w1 = 2.0 * h[i] + h[i - 1];
            const double w2 = h[i] + 2.0 * h[i - 1];
            d_[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
        }
    }
    // One-sided three-point end slopes, limited to preserve monotonicity.
    auto end_slope = [](double h0, double h1, double d0, double d1) {
        double d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
        if (d * d0 <= 0.0)
            d = 0.0;
        else if (d0 * d1 <= 0.0 && std::abs(d) > std::abs(3.0 * d0))
            d = 3.0 * d0;
        return d;
    };
    d_[0] = end_slope(h[0], h[1], delta[0], delta[1]);
    d_[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
}

double MonotoneCubic::segment(std::size_t i, double x) const {
    const double h = x_[i + 1] - x_[i];
    const double s = (x - x_[i]) / h;
    const double s2 = s * s, s3 = s2 * s;
    return (2 * s3 - 3 * s2 + 1) * y_[i] + (s3 - 2 * s2 + s) * h * d_[i] + (-2 * s3 + 3 * s2) * y_[i + 1] +
           (s3 - s2) * h * d_[i + 1];
}

double MonotoneCubic::operator()(double x) const {
    if (x <= x_.front()) return y_.front();
    if (x >= x_.back()) return y_.back();
    auto it = std::upper_bound(x_.begin(), x_.end(), x);
    return segment(static_cast<std::size_t>(it - x_.begin()) - 1, x);
}

void MonotoneCubic::evaluate_sorted(std::span<const double> x, std::span<double> out) const {
    std::size_t seg = 0;
    for (std::size_t j = 0; j < x.size(); ++j) {
        const double v = x[j];
        if (v <= x_.front()) {
            out[j] = y_.front();
        } else if (v >= x_.back()) {
            out[j] = y_.back();
        } else {
            while (x_[seg + 1] < v) ++seg;
            out[j] = segment(seg, v);
        }
    }
}

double MonotoneCubic::max_abs_slope() const {
    double m = 0.0;
    for (double d : d_) m = std::max(m, std::abs(d));
    for (std::size_t i = 0; i + 1 < x_.size(); ++i)
        m = std::max(m, std::abs((y_[i + 1] - y_[i]) / (x_[i + 1] - x_[i])));
    return m;
}

std::string_view to_string(TimeInterpolation t) {
    return t == TimeInterpolation::total_variance ? "total_variance" : "local_variance";
}

TimeInterpolation parse_time_interpolation(std::string_view s) {
    if (s == "total_variance") return TimeInterpolation::total_variance;
    if (s == "local_variance") return TimeInterpolation::local_variance;
    fail(ErrorCode::parse, "unknown time interpolation '" + std::string(s) + "'");
}

LocalVolSurface::LocalVolSurface(std::vector<LocalVolPillar> pillars, TimeInterpolation interpolation,
                                 LocalVolBounds bounds)
    : pillars_(std::move(pillars)), interpolation_(interpolation), bounds_(bounds) {
    if (pillars_.empty()) fail(ErrorCode::invalid_input, "local volatility surface needs at least one pillar");
    if (!(bounds_.min > 0.0) || !(bounds_.max > bounds_.min)) fail(ErrorCode::invalid_input, "invalid local-vol bounds");
    for (std::size_t i = 0; i < pillars_.size(); ++i) {
        const auto& p = pillars_[i];
        if (!(p.t > 0.0)) fail(ErrorCode::invalid_input, "local-vol pillar times must be positive");
        if (i > 0 && !(p.t > pillars_[i - 1].t)) fail(ErrorCode::invalid_input, "local-vol pillars must increase in t");
        for (double e : p.eta)
            if (!(e >= bounds_.min * (1 - 1e-12)) || !(e <= bounds_.max * (1 + 1e-12)))
                fail(ErrorCode::invalid_input, "local-vol node outside [eta_min, eta_max]");
        splines_.emplace_back(p.k, p.eta);
    }
}

LocalVolSurface::Blend LocalVolSurface::blend(double t) const {
    const std::size_t n = pillars_.size();
    if (t <= pillars_.front().t) return {0, 0, 0.0};
    if (t > pillars_.back().t) return {n - 1, n - 1, 0.0};
    // first pillar with t_i >= t
    auto it = std::lower_bound(pillars_.begin(), pillars_.end(), t, [](const LocalVolPillar& p, double x) { return p.t < x; });
    const auto hi = static_cast<std::size_t>(it - pillars_.begin());
    if (interpolation_ == TimeInterpolation::total_variance || pillars_[hi].t == t) return {hi, hi, 0.0};
    const double w = (t - pillars_[hi - 1].t) / (pillars_[hi].t - pillars_[hi - 1].t);
    return {hi - 1, hi, w};
}

double LocalVolSurface::operator()(double t, double k) const {
    const auto b = blend(t);
    const double lo = splines_[b.lo](k);
    if (b.w == 0.0) return lo;
    const double hi = splines_[b.hi](k);
    return std::sqrt((1.0 - b.w) * lo * lo + b.w * hi * hi);
}

std::unique_ptr<LocalVolSampler> LocalVolSurface::on_grid(std::span<const double> k) const {
    std::vector<std::vector<double>> tables(splines_.size(), std::vector<double>(k.size()));
    for (std::size_t i = 0; i < splines_.size(); ++i) splines_[i].evaluate_sorted(k, tables[i]);
    return std::make_unique<SurfaceSampler>(*this, std::move(tables));
}

std::size_t LocalVolSurface::node_count() const {
    std::size_t n = 0;
    for (const auto& p : pillars_) n += p.eta.size();
    return n;
}

std::vector<double> LocalVolSurface::nodes() const {
    std::vector<double> out;
    out.reserve(node_count());
    for (const auto& p : pillars_) out.insert(out.end(), p.eta.begin(), p.eta.end());
    return out;
}

LocalVolSurface LocalVolSurface::with_nodes(std::span<const double> nodes) const {
    if (nodes.size() != node_count()) fail(ErrorCode::invalid_input, "node vector size mismatch");
    auto pillars = pillars_;
    std::size_t pos = 0;
    for (auto& p : pillars)
        for (auto& e : p.eta) e = nodes[pos++];
    return LocalVolSurface(std::move(pillars), interpolation_, bounds_);
}

double LocalVolSurface::max_node() const {
    double m = 0.0;
    for (const auto& p : pillars_)
        for (double e : p.eta) m = std::max(m, e);
    return m;
}

double LocalVolSurface::max_strike_slope() const {
    double m = 0.0;
    for (const auto& s : splines_) m = std::max(m, s.max_abs_slope());
    return m;
}

}  // namespace futsmile
