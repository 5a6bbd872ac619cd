#pragma once

#include "futsmile/spot_model.hpp"

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

namespace futsmile {

/// rho1 rho2 + sqrt((1 - rho1^2)(1 - rho2^2)).
double instantaneous_correlation(double rho1, double rho2);

struct SlvParams {
    double xi = 0.0;                      ///< vol of vol
    double rho_v = 0.0;                   ///< correlation of W^v with each futures driver
    std::vector<double> rho_maturities;   ///< T^last nodes of the loading rho(T); empty means rho = 1
    std::vector<double> rho_values;
    double dt = 1.0 / 365.0;
    std::size_t block_size = 4096;        ///< paths per random-number stream
    double bandwidth_scale = 1.5;         ///< multiple of Silverman's bandwidth
    std::size_t min_effective = 50;       ///< particles each regression point must see
    std::size_t table_size = 2048;        ///< strike table for eta per step
};

/// Two-factor futures dynamics dF(T) = v eta_F / sqrt(E[v^2 | F(T)]) (rho dW1 + sqrt(1-rho^2) dW2)
/// with lognormal OU volatility v normalized so that E[v^2] = 1.
class SlvModel {
public:
    SlvModel(std::shared_ptr<const CalibratedSpotModel> base, SlvParams params);

    [[nodiscard]] const CalibratedSpotModel& base() const { return *base_; }
    [[nodiscard]] const SlvParams& params() const { return params_; }
    /// Loading rho(T): linear between nodes, clipped to [-1, 1], flat outside.
    [[nodiscard]] double rho(double T) const;
    [[nodiscard]] double instantaneous_correlation(double T1, double T2) const;

private:
    std::shared_ptr<const CalibratedSpotModel> base_;
    SlvParams params_;
};

struct SimulationRequest {
    std::vector<double> pillars;        ///< futures T^last values to simulate
    std::vector<double> monitor_times;  ///< times at which the cloud is stored
    std::size_t n_paths = 10000;
    std::uint64_t seed = 1;
};

struct MonitorDiagnostics {
    double t = 0.0;
    double mean_v2 = 0.0;
    double se_v2 = 0.0;
    std::vector<double> martingale_error;  ///< per pillar, (mean F - F0) / F0
    std::vector<double> martingale_z;      ///< per pillar, (mean F - F0) / SE
};

/// Simulated futures and variance at the monitor times.
class PathEnsemble {
public:
    PathEnsemble(std::vector<double> pillars, std::vector<double> monitor_times, std::vector<double> F0, std::size_t n_paths);

    [[nodiscard]] std::size_t n_paths() const { return n_; }
    [[nodiscard]] std::span<const double> pillars() const { return pillars_; }
    [[nodiscard]] std::span<const double> monitor_times() const { return times_; }
    [[nodiscard]] std::span<const double> initial_futures() const { return F0_; }

    [[nodiscard]] std::size_t monitor_index(double t) const;
    [[nodiscard]] std::size_t pillar_index(double T) const;
    [[nodiscard]] std::span<const double> futures(std::size_t monitor, std::size_t pillar) const;
    [[nodiscard]] std::span<const double> variance(std::size_t monitor) const;  ///< v^2
    std::span<double> futures_mut(std::size_t monitor, std::size_t pillar);
    std::span<double> variance_mut(std::size_t monitor);

    [[nodiscard]] MonitorDiagnostics diagnostics(std::size_t monitor) const;

private:
    std::vector<double> pillars_;
    std::vector<double> times_;
    std::vector<double> F0_;
    std::size_t n_;
    std::vector<double> futures_;  // [monitor][pillar][path]
    std::vector<double> v2_;       // [monitor][path]
};

PathEnsemble simulate_paths(const SlvModel& model, const SimulationRequest& request);

struct McPrice {
    double price = 0.0;
    double se = 0.0;
};

/// Future-style vanilla premium from the stored cloud at (t, T).
McPrice mc_price_vanilla(const PathEnsemble& paths, double t, double T, double K);
McPrice mc_price_vanilla(const SlvModel& model, double t, double T, double K, std::size_t n_paths, std::uint64_t seed);

/// Future-style spread premium (F(T1) - F(T2) - K)^+ at T_e.
McPrice mc_price_cso(const PathEnsemble& paths, double T_e, double T1, double T2, double K);
McPrice mc_price_cso(const SlvModel& model, double T_e, double T1, double T2, double K, std::size_t n_paths,
                     std::uint64_t seed);

/// Sample correlation of F_t(T1) and F_t(T2).
double mc_terminal_correlation(const PathEnsemble& paths, double t, double T1, double T2);

/// Nadaraya-Watson estimate of E[y | x] with an Epanechnikov kernel evaluated through a binned grid.
class LeverageEstimator {
public:
    LeverageEstimator(double bandwidth_scale = 1.5, std::size_t min_effective = 50);

    /// Fits on (x, y) and writes the estimate at every x into `out`.
    void fit_predict(std::span<const double> x, std::span<const double> y, std::span<double> out);

    [[nodiscard]] double last_bandwidth() const { return bandwidth_; }

private:
    double scale_;
    std::size_t min_effective_;
    double bandwidth_ = 0.0;
    std::vector<double> count_, sum_, grid_value_;
};

}  // namespace futsmile
