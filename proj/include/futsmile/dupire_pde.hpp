#pragma once

#include "futsmile/local_vol_surface.hpp"
#include "futsmile/mean_reversion.hpp"

#include <span>
#include <vector>

namespace futsmile {

/// Discretization parameters for the forward PDE in (t, k).
struct PdeGridSpec {
    int strike_intervals = 800;         ///< number of strike intervals M
    double k_max = 0.0;                 ///< far boundary; 0 selects it from the volatility level
    double width = 8.0;                 ///< automatic k_max >= exp(width * sigma_max * sqrt(T_max))
    double concentration = 0.1;         ///< sinh stretching scale around k = 1 (smaller is denser)
    double dt_max = 1.0 / 730.0;        ///< maximum time step
    int rannacher_steps = 2;            ///< leading steps replaced by implicit half-steps
    double theta = 0.5;                 ///< 0.5 = Crank-Nicolson
    double peclet_limit = 2.0;          ///< switch to upwind drift above this cell Peclet number
    double convexity_tolerance = 1e-6;  ///< oscillation detector threshold on slope decreases
};

/// Strike nodes 0 = k_0 < ... < k_M = k_max (k = 1 is a node) and time nodes 0 = t_0 < ... < t_N
/// containing every requested maturity exactly.
class PdeGrid {
public:
    static PdeGrid build(const PdeGridSpec& spec, std::vector<double> required_times, double sigma_max,
                         double max_effective_strike = 1.0);

    [[nodiscard]] std::span<const double> strikes() const { return strikes_; }
    [[nodiscard]] std::span<const double> times() const { return times_; }
    [[nodiscard]] const PdeGridSpec& spec() const { return spec_; }
    [[nodiscard]] std::size_t atm_index() const { return atm_; }

private:
    PdeGridSpec spec_;
    std::vector<double> strikes_;
    std::vector<double> times_;
    std::size_t atm_ = 0;
};

/// Normalized call prices c(t_n, k_m) on the PDE grid.
class CallSurface {
public:
    CallSurface() = default;
    CallSurface(std::vector<double> times, std::vector<double> strikes, std::vector<double> values);

    /// Cubic Hermite in k, linear in t between time nodes; c = 1 - k for k <= 0, 0 beyond k_max.
    [[nodiscard]] double operator()(double t, double k) const;

    [[nodiscard]] std::span<const double> times() const { return times_; }
    [[nodiscard]] std::span<const double> strikes() const { return strikes_; }
    [[nodiscard]] std::span<const double> slice(std::size_t n) const;
    [[nodiscard]] double horizon() const { return times_.back(); }

    /// Index of the time node equal to t (to 1e-12), or -1.
    [[nodiscard]] long node_index(double t) const;

private:
    [[nodiscard]] double interpolate_k(std::size_t n, double k) const;

    std::vector<double> times_;
    std::vector<double> strikes_;
    std::vector<double> values_;  // row-major [time][strike]
};

/// Solves dc/dt = (-a - a(1-k) d/dk + 1/2 k^2 eta^2 d2/dk2) c with c(t,0)=1, c(t,k_max)=0,
/// c(0,k)=(1-k)^+ by a theta-scheme with Rannacher start-up.
CallSurface solve_dupire(const LocalVol& eta, const MeanReversion& a, const PdeGrid& grid);

struct DensitySlice {
    double t = 0.0;
    std::vector<double> k;        ///< interior strike nodes
    std::vector<double> density;  ///< d2c/dk2
    std::vector<double> cdf;      ///< 1 + dc/dk
    double mass = 0.0;
    double mean = 0.0;
};

/// Risk-neutral density of s_t from second strike differences at time node t.
/// Throws Error(arbitrage) if the density is below -tolerance.
DensitySlice density_slice(const CallSurface& surface, double t, double tolerance = 1e-6);

/// E[s_t^2] = 2 int_0^inf c(t,k) dk by trapezoidal quadrature on the grid.
double second_moment(const CallSurface& surface, double t);

}  // namespace futsmile
