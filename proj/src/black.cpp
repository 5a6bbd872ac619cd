#include "futsmile/black.hpp"

#include "futsmile/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace futsmile::black {

double norm_cdf(double x) { return 0.5 * std::erfc(-x * std::numbers::sqrt2 / 2.0); }

double norm_pdf(double x) { return std::exp(-0.5 * x * x) * std::numbers::inv_sqrtpi / std::numbers::sqrt2; }

namespace {

// Out-of-the-money normalized option: call for k >= 1, put for k < 1.
double otm_price(double t, double k, double sigma) {
    const double sd = sigma * std::sqrt(t);
    const double y = -std::log(k) / sd - 0.5 * sd;
    if (k >= 1.0) return norm_cdf(y + sd) - k * norm_cdf(y);
    return k * norm_cdf(-y) - norm_cdf(-y - sd);
}

}  // namespace

double call(double t, double k, double sigma) {
    if (k <= 0.0) return 1.0 - k;
    if (t <= 0.0 || sigma <= 0.0) return std::max(1.0 - k, 0.0);
    const double otm = std::max(otm_price(t, k, sigma), 0.0);
    return k >= 1.0 ? otm : (1.0 - k) + otm;
}

double put(double t, double k, double sigma) {
    if (k <= 0.0) return 0.0;
    if (t <= 0.0 || sigma <= 0.0) return std::max(k - 1.0, 0.0);
    const double otm = std::max(otm_price(t, k, sigma), 0.0);
    return k >= 1.0 ? otm + (k - 1.0) : otm;
}

double vega(double t, double k, double sigma) {
    const double sd = sigma * std::sqrt(t);
    const double y = -std::log(k) / sd - 0.5 * sd;
    return std::sqrt(t) * norm_pdf(y + sd);
}

Greeks greeks(double t, double k, double sigma) {
    if (!(t > 0.0) || !(k > 0.0) || !(sigma > 0.0))
        fail(ErrorCode::invalid_input, "black greeks require t > 0, k > 0, sigma > 0");
    const double st = std::sqrt(t);
    const double sd = sigma * st;
    const double y = -std::log(k) / sd - 0.5 * sd;
    const double v = st * norm_pdf(y + sd);
    Greeks g{};
    g.vega = v;
    g.theta = sigma / (2.0 * t) * v;
    g.dual_delta = -norm_cdf(y);
    g.dual_gamma = v / (k * k * sigma * t);
    g.dual_vanna = v * (y + sd) / (k * sd);
    g.volga = v * y * (y + sd) / sigma;
    return g;
}

double lambda_ratio(double t, double k, double sigma) {
    const double sd = sigma * std::sqrt(t);
    const double y = -std::log(k) / sd - 0.5 * sd;
    // Phi(b) - Phi(a) for a = y, b = y + sd, evaluated on the side with the smaller tail.
    double diff;
    if (y > 0.0)
        diff = norm_cdf(-y) - norm_cdf(-y - sd);
    else
        diff = norm_cdf(y + sd) - norm_cdf(y);
    return diff / (std::sqrt(t) * norm_pdf(y + sd));
}

std::optional<double> try_implied_vol(double price, double t, double k) {
    if (!(t > 0.0) || !(k > 0.0) || !std::isfinite(price)) return std::nullopt;
    const double intrinsic = std::max(1.0 - k, 0.0);
    if (!(price > intrinsic) || !(price < 1.0)) return std::nullopt;
    // Solve on the out-of-the-money side for precision.
    const double target = k >= 1.0 ? price : price - (1.0 - k);
    if (!(target > 0.0)) return std::nullopt;
    const double st = std::sqrt(t);
    const double logk = std::abs(std::log(k));

    double lo = 0.0;
    double hi = std::max(1.0, 2.0 * std::sqrt(2.0 * logk / t));
    while (otm_price(t, k, hi) < target) {
        hi *= 2.0;
        if (hi > 1e6) return std::nullopt;
    }
    // Start at the inflection point of the price in sigma, or the ATM approximation.
    double sigma = logk > 1e-8 ? std::sqrt(2.0 * logk / t) : target * std::sqrt(2.0 * std::numbers::pi) / st;
    sigma = std::clamp(sigma, 0.5 * hi * 1e-6, hi);
    for (int iter = 0; iter < 200; ++iter) {
        const double f = otm_price(t, k, sigma) - target;
        if (f == 0.0) return sigma;
        if (f > 0.0)
            hi = sigma;
        else
            lo = sigma;
        const double v = vega(t, k, sigma);
        double next = v > 0.0 ? sigma - f / v : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::abs(next - sigma) <= 1e-15 * sigma || hi - lo <= 4e-16 * hi) return next;
        sigma = next;
    }
    return sigma;
}

double implied_vol(double price, double t, double k) {
    if (auto v = try_implied_vol(price, t, k)) return *v;
    std::ostringstream os;
    os.precision(17);
    os << "price " << price << " outside the Black no-arbitrage band for t=" << t << ", k=" << k;
    fail(ErrorCode::arbitrage, os.str());
}

SurfaceDerivatives ImpliedSurfaceView::derivatives(double t, double k) const {
    if (analytic) return analytic(t, k);
    const double hk = relative_step * k;
    const double ht = relative_step * t;
    SurfaceDerivatives d{};
    d.sigma = sigma(t, k);
    const double up = sigma(t, k + hk);
    const double dn = sigma(t, k - hk);
    d.d_k = (up - dn) / (2.0 * hk);
    d.d_kk = (up - 2.0 * d.sigma + dn) / (hk * hk);
    d.d_t = (sigma(t + ht, k) - sigma(t - ht, k)) / (2.0 * ht);
    return d;
}

double local_vol_from_implied(const ImpliedSurfaceView& surface, const std::function<double(double)>& mean_reversion,
                              double t, double k) {
    if (!(t > 0.0) || !(k > 0.0)) fail(ErrorCode::invalid_input, "local_vol_from_implied requires t > 0, k > 0");
    const auto d = surface.derivatives(t, k);
    const double s = d.sigma;
    if (!(s > 0.0)) fail(ErrorCode::invalid_input, "implied volatility must be positive");
    const double a = mean_reversion ? mean_reversion(t) : 0.0;
    const double st = std::sqrt(t);
    const double y = -std::log(k) / (s * st) - 0.5 * s * st;
    const double lambda = lambda_ratio(t, k, s);
    const double num = s * s + 2.0 * s * t * d.d_t + 2.0 * a * s * t * (lambda + (1.0 - k) * d.d_k);
    const double den = 1.0 + 2.0 * k * st * (y + s * st) * d.d_k + k * k * s * t * d.d_kk +
                       k * k * t * y * (y + s * st) * d.d_k * d.d_k;
    if (!(den > 0.0)) {
        std::ostringstream os;
        os << "butterfly arbitrage: non-positive Dupire denominator at t=" << t << ", k=" << k;
        fail(ErrorCode::arbitrage, os.str());
    }
    if (!(num > 0.0)) {
        std::ostringstream os;
        os << "calendar arbitrage: non-positive Dupire numerator at t=" << t << ", k=" << k;
        fail(ErrorCode::arbitrage, os.str());
    }
    return std::sqrt(num / den);
}

namespace {

double simpson(const std::function<double(double)>& f, double a, double fa, double b, double fb, double m, double fm,
               double whole, double tol, int depth) {
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
    return simpson(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1) +
           simpson(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1);
}

}  // namespace

double short_time_implied(const std::function<double(double)>& eta0, double k, double tolerance) {
    if (!(k > 0.0)) fail(ErrorCode::invalid_input, "short_time_implied requires k > 0");
    auto integrand = [&](double x) {
        const double e = eta0(x);
        if (!(e > 0.0)) {
            std::ostringstream os;
            os << "local volatility must be positive, got " << e << " at x=" << x;
            fail(ErrorCode::invalid_input, os.str());
        }
        return 1.0 / (x * e);
    };
    const double logk = std::log(k);
    if (std::abs(logk) < 1e-10) {
        integrand(1.0);
        return eta0(1.0);
    }
    const double a = 1.0, b = k, m = 0.5 * (a + b);
    const double fa = integrand(a), fb = integrand(b), fm = integrand(m);
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    const double integral = simpson(integrand, a, fa, b, fb, m, fm, whole, tolerance, 50);
    return logk / integral;
}

}  // namespace futsmile::black
