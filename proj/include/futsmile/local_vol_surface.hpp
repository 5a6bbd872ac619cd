#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

namespace futsmile {

/// Evaluates a local volatility at a fixed set of strikes for successive times.
class LocalVolSampler {
public:
    virtual ~LocalVolSampler() = default;
    virtual void fill(double t, std::span<double> out) = 0;
};

/// Local volatility eta(t,k) of the normalized spot.
class LocalVol {
public:
    virtual ~LocalVol() = default;

    [[nodiscard]] virtual double operator()(double t, double k) const = 0;

    /// Sampler bound to a strike grid; the default evaluates pointwise.
    [[nodiscard]] virtual std::unique_ptr<LocalVolSampler> on_grid(std::span<const double> k) const;
};

/// Adapter for analytic test surfaces.
class FunctionLocalVol final : public LocalVol {
public:
    explicit FunctionLocalVol(std::function<double(double, double)> f) : f_(std::move(f)) {}
    [[nodiscard]] double operator()(double t, double k) const override { return f_(t, k); }

private:
    std::function<double(double, double)> f_;
};

/// Monotone (Fritsch-Carlson) cubic Hermite interpolant with constant extrapolation.
class MonotoneCubic {
public:
    MonotoneCubic() = default;
    MonotoneCubic(std::vector<double> x, std::vector<double> y);

    [[nodiscard]] double operator()(double x) const;
    /// `x` must be sorted ascending.
    void evaluate_sorted(std::span<const double> x, std::span<double> out) const;
    [[nodiscard]] double max_abs_slope() const;

private:
    [[nodiscard]] double segment(std::size_t i, double x) const;

    std::vector<double> x_, y_, d_;
};

enum class TimeInterpolation {
    total_variance,  ///< pillar i applies on (t_{i-1}, t_i], so total variance is linear between pillars
    local_variance,  ///< eta^2 itself linear in t between pillars
};

std::string_view to_string(TimeInterpolation t);
TimeInterpolation parse_time_interpolation(std::string_view s);

struct LocalVolPillar {
    double t = 0.0;
    std::vector<double> k;    ///< effective-strike nodes, strictly increasing
    std::vector<double> eta;  ///< node values
};

struct LocalVolBounds {
    double min = 1e-4;
    double max = 5.0;
};

/// Non-parametric local volatility on (maturity, effective-strike) nodes: monotone cubic in k
/// per pillar, blended in t, constant extrapolation in both directions.
class LocalVolSurface final : public LocalVol {
public:
    LocalVolSurface() = default;
    LocalVolSurface(std::vector<LocalVolPillar> pillars, TimeInterpolation interpolation = TimeInterpolation::total_variance,
                    LocalVolBounds bounds = {});

    [[nodiscard]] double operator()(double t, double k) const override;
    [[nodiscard]] std::unique_ptr<LocalVolSampler> on_grid(std::span<const double> k) const override;

    [[nodiscard]] std::span<const LocalVolPillar> pillars() const { return pillars_; }
    [[nodiscard]] TimeInterpolation time_interpolation() const { return interpolation_; }
    [[nodiscard]] LocalVolBounds bounds() const { return bounds_; }

    [[nodiscard]] std::size_t node_count() const;
    /// Node values flattened pillar by pillar.
    [[nodiscard]] std::vector<double> nodes() const;
    [[nodiscard]] LocalVolSurface with_nodes(std::span<const double> nodes) const;

    [[nodiscard]] double max_node() const;
    /// Largest |d eta / dk| of the strike interpolants (Lipschitz diagnostic).
    [[nodiscard]] double max_strike_slope() const;

    /// Pillar weights (index, weight) for time t; at most two entries.
    struct Blend {
        std::size_t lo, hi;
        double w;  ///< weight of `hi`
    };
    [[nodiscard]] Blend blend(double t) const;

private:
    std::vector<LocalVolPillar> pillars_;
    std::vector<MonotoneCubic> splines_;
    TimeInterpolation interpolation_ = TimeInterpolation::total_variance;
    LocalVolBounds bounds_;
};

}  // namespace futsmile
