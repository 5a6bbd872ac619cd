#pragma once

#include "futsmile/dupire_pde.hpp"
#include "futsmile/exotics.hpp"
#include "futsmile/market_data.hpp"
#include "futsmile/mean_reversion.hpp"
#include "futsmile/spot_model.hpp"

#include <filesystem>
#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

namespace fstest {

/// Smooth skewed local vol used as ground truth in synthetic markets.
double reference_eta(double t, double k);

/// Seasonal futures curve with a mild upward drift.
double seasonal_curve(double T);

struct SyntheticSpec {
    double a = 0.5;
    std::vector<int> expiry_days{36, 73, 110, 146, 183, 274, 365, 456, 548, 639, 730};
    std::vector<double> moneyness{-2.0, -1.25, -0.5, 0.0, 0.5, 1.25, 2.0};  ///< K/F0 = exp(x * 0.2 sqrt(t))
    int lag_days = 10;                                                        ///< option expiry to T^last
    std::function<double(double, double)> eta = reference_eta;
    bool mixed_styles = true;  ///< alternate future/equity style quotes
    std::function<double(double)> futures = seasonal_curve;
    futsmile::PdeGridSpec reference_grid = fine_grid();

    static futsmile::PdeGridSpec fine_grid();
};

/// Curves and calendars for contracts expiring on `expiry_days`; no quotes.
futsmile::MarketData synthetic_curves(const std::vector<int>& expiry_days, int lag_days,
                                      const std::function<double(double)>& futures = seasonal_curve);

/// Quotes priced from spec.eta with a fine PDE grid at mean reversion spec.a.
futsmile::MarketData synthetic_market(const SyntheticSpec& spec);

/// Flat-vol market (quotes all at `vol`).
futsmile::MarketData flat_market(double vol, const SyntheticSpec& spec);

/// Writes futures.csv, discount.csv, calendars.csv and quotes.csv.
void write_market(const futsmile::MarketData& market, const std::filesystem::path& dir);

/// Model with constant local vol `eta` on a hand-built futures curve. `times` must include every
/// option expiry that will be priced; they become PDE nodes.
std::shared_ptr<const futsmile::CalibratedSpotModel> flat_model(double a, double eta, std::vector<futsmile::CurvePillar> futures,
                                                                 std::vector<double> times, futsmile::PdeGridSpec grid = {});

/// Independent sampler of the normalized spot s_t for constant a and eta, using
/// s_t = Y_t (1 + a int_0^t du / Y_u) with Y the exact geometric OU factor and the integral by trapezoid.
std::vector<double> sample_spot(double a, double eta, double t, std::size_t n, std::uint64_t seed, double dt = 1.0 / 365.0);

struct Estimate {
    double mean = 0.0;
    double se = 0.0;
};
Estimate estimate(const std::vector<double>& x);

/// Calendar-spread quotes on consecutive contracts at the near option expiry, priced from the
/// reference local vol of `spec` (fine PDE, mean reversion spec.a). Strikes are the forward spread
/// shifted by `strike_offsets` times 1% of the near forward.
std::vector<futsmile::CsoQuote> synthetic_cso_quotes(const futsmile::MarketData& market, const SyntheticSpec& spec,
                                                     const std::vector<double>& strike_offsets = {-1.0, 0.0, 1.0});
void write_cso_quotes(const std::vector<futsmile::CsoQuote>& quotes, const std::filesystem::path& path);

/// Fresh empty directory under the system temp dir.
std::filesystem::path scratch_dir(const std::string& name);

}  // namespace fstest
