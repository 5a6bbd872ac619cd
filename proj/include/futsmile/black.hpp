#pragma once

#include <functional>
#include <optional>

/// Normalized Black-76 analytics: prices are per unit forward, strikes are k = K/F.
namespace futsmile::black {

double norm_cdf(double x);
double norm_pdf(double x);

/// c(t,k,sigma) = Phi(y + sigma sqrt(t)) - k Phi(y), y = -log(k)/(sigma sqrt(t)) - sigma sqrt(t)/2.
/// Boundary limits: k <= 0 gives 1 - k, t = 0 or sigma = 0 gives (1-k)^+.
double call(double t, double k, double sigma);

/// Normalized put via the same limits, p = c - (1 - k).
double put(double t, double k, double sigma);

struct Greeks {
    double vega;        ///< d c / d sigma
    double theta;       ///< d c / d t
    double dual_delta;  ///< d c / d k
    double dual_gamma;  ///< d2 c / d k2
    double dual_vanna;  ///< d2 c / d k d sigma
    double volga;       ///< d2 c / d sigma2
};

/// Closed-form Greeks; requires t > 0, k > 0, sigma > 0.
Greeks greeks(double t, double k, double sigma);

double vega(double t, double k, double sigma);

/// (Phi(y + sigma sqrt t) - Phi(y)) / Vega, which tends to the implied vol as t -> 0.
double lambda_ratio(double t, double k, double sigma);

/// Inverts call(); throws Error(arbitrage) when the price is outside ((1-k)^+, 1).
double implied_vol(double price, double t, double k);

/// Non-throwing variant; empty when the price is outside the no-arbitrage band.
std::optional<double> try_implied_vol(double price, double t, double k);

struct SurfaceDerivatives {
    double sigma;
    double d_t;
    double d_k;
    double d_kk;
};

/// Implied volatility surface sigma(t,k) with first/second strike and time derivatives.
/// Derivatives come from `analytic` when set, else central differences with relative step
/// `relative_step` (default 1e-4).
struct ImpliedSurfaceView {
    std::function<double(double t, double k)> sigma;
    std::function<SurfaceDerivatives(double t, double k)> analytic;
    double relative_step = 1e-4;

    [[nodiscard]] SurfaceDerivatives derivatives(double t, double k) const;
};

/// Local volatility eta(t,k) of the mean-reverting normalized spot implied by `surface`.
/// Throws Error(arbitrage) when the denominator k^2 d2c/dk2 (or the numerator) is not positive.
double local_vol_from_implied(const ImpliedSurfaceView& surface, const std::function<double(double)>& mean_reversion,
                              double t, double k);

/// Short-maturity limit sigma(0,k) = log k / int_1^k dx / (x eta0(x)) (adaptive Simpson, tol 1e-10).
double short_time_implied(const std::function<double(double)>& eta0, double k, double tolerance = 1e-10);

}  // namespace futsmile::black
