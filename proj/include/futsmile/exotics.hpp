#pragma once

#include "futsmile/calibration.hpp"
#include "futsmile/market_data.hpp"
#include "futsmile/pricing.hpp"
#include "futsmile/spot_model.hpp"

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace futsmile {

/// Mid-curve option: vanilla on the contract with T^last = T expiring early at T_e < T.
double price_mco(const CalibratedSpotModel& model, double T_e, double T, double K, MarginStyle style, double T_p,
                 OptionType type = OptionType::call);

enum class CsoCase { a_pos_b_pos, a_pos_b_nonpos, a_neg_b_pos, a_nonpos_b_nonpos, degenerate };

/// Payoff (F_{T_e}(T1) - F_{T_e}(T2) - K)^+ = (A s - A B)^+ in terms of the normalized spot.
struct CsoCoefficients {
    double A = 0.0;
    double B = 0.0;
    CsoCase kind = CsoCase::degenerate;
};

CsoCoefficients cso_coefficients(const MeanReversion& a, double F01, double F02, double T_e, double T1, double T2, double K);

/// Future-style CSO premium from a normalized call function c(k) at T_e.
double cso_from_calls(const CsoCoefficients& coef, const std::function<double(double)>& c, double F01, double F02, double K);

/// Future-style CSO premium under the one-factor model.
double price_cso_closed_form(const CalibratedSpotModel& model, double T_e, double T1, double T2, double K);

/// Spread price with perfectly correlated lognormal legs of vols s1 (near) and s2 (far) at expiry T_e.
double cso_metric_price(double F01, double F02, double T_e, double K, double s1, double s2);

struct CsoMetricRoots {
    std::vector<double> roots;  ///< ascending
    [[nodiscard]] double lesser() const { return roots.front(); }
};

/// All far-leg vols in (0, upper] reproducing `price`; throws when there is none.
CsoMetricRoots cso_quote_metric_roots(double F01, double F02, double T_e, double K, double s1, double price,
                                      double upper = 5.0);

/// Lesser far-leg vol reproducing `price`.
double cso_quote_metric(double F01, double F02, double T_e, double K, double s1, double price);

struct CsoQuote {
    double expiry = 0.0;
    std::string near;
    std::string far;
    double strike = 0.0;
    double price = 0.0;
};

/// Reads cso_quotes.csv (expiry, near, far, strike, price).
std::vector<CsoQuote> load_cso_quotes(const std::filesystem::path& path, const MarketData& market);

/// Vols entering a volatility drop: near ATM vol at T_e, far ATM vol at its own option expiry.
struct DropInputs {
    double F01 = 0.0;
    double F02 = 0.0;
    double T1 = 0.0;
    double T2 = 0.0;
    double sigma_near = 0.0;
    double sigma_far = 0.0;
};

DropInputs drop_inputs(const CalibratedSpotModel& model, const CsoQuote& quote);

/// sigma_far minus the CSO-implied far-leg vol at the near expiry.
double volatility_drop(const DropInputs& in, const CsoQuote& quote, double price);

struct MeanReversionTrial {
    double a = 0.0;
    bool ok = false;
    std::string message;
    double objective = 0.0;
    std::vector<double> model_drops;
    std::vector<double> market_drops;
    int calibration_iterations = 0;
};

struct MeanReversionFitConfig {
    double lower = 0.0;
    double upper = 1.5;
    double step = 0.05;
    bool refine = true;
    double refine_tolerance = 1e-3;
    CalibrationConfig calibration;
};

struct MeanReversionFit {
    double a = 0.0;
    double objective = 0.0;
    std::vector<MeanReversionTrial> trials;  ///< grid trials in order, refinement trials appended
    std::size_t grid_trials = 0;
};

/// Scalar a minimizing the squared gap between market and model volatility drops.
MeanReversionFit fit_mean_reversion(const MarketData& market, const std::vector<CsoQuote>& quotes,
                                    const MeanReversionFitConfig& config);

/// Single trial: recalibrate at `a` and compare drops.
MeanReversionTrial evaluate_mean_reversion(const MarketData& market, const std::vector<CsoQuote>& quotes, double a,
                                           const CalibrationConfig& config);

}  // namespace futsmile
