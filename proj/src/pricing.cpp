#include "futsmile/pricing.hpp"

#include "futsmile/black.hpp"
#include "futsmile/error.hpp"

#include <cmath>
#include <sstream>

namespace futsmile {

double price_vanilla_future_style(const CalibratedSpotModel& model, double t, double T, double K, OptionType type) {
    if (!(t >= 0.0)) fail(ErrorCode::invalid_input, "option expiry must be non-negative");
    if (t > T) {
        std::ostringstream os;
        os << "option expiry " << t << " after contract T^last " << T;
        fail(ErrorCode::invalid_input, os.str());
    }
    if (t > model.calls().horizon() + 1e-12) {
        std::ostringstream os;
        os << "expiry " << t << " beyond calibrated horizon " << model.calls().horizon();
        fail(ErrorCode::out_of_range, os.str());
    }
    const double F0T = model.curve()(T);
    const double A = model.mean_reversion().integral(t, T);
    // Strikes at or below the absorbing level give k <= 0, where the call is intrinsic: F0 - K.
    const double k = effective_strike(model.mean_reversion(), t, T, K, F0T);
    const double call = F0T * std::exp(-A) * model.normalized_call(t, k);
    return type == OptionType::call ? call : call - (F0T - K);
}

double price_vanilla_equity_style(const CalibratedSpotModel& model, double t, double T, double K, double T_p,
                                  OptionType type) {
    if (T_p < t) fail(ErrorCode::invalid_input, "premium payment before option expiry");
    return price_vanilla_future_style(model, t, T, K, type) * model.market().discount.df(T_p);
}

double price_vanilla(const CalibratedSpotModel& model, double t, double T, double K, MarginStyle style, double T_p,
                     OptionType type) {
    return style == MarginStyle::future ? price_vanilla_future_style(model, t, T, K, type)
                                        : price_vanilla_equity_style(model, t, T, K, T_p, type);
}

double implied_vol_from_price(double premium, double t, double F0T, double K, OptionType type, double discount) {
    if (!(discount > 0.0) || !(F0T > 0.0) || !(K > 0.0)) fail(ErrorCode::invalid_input, "implied vol needs positive F0, K and discount");
    double c = premium / discount / F0T;
    const double k = K / F0T;
    if (type == OptionType::put) c += 1.0 - k;
    return black::implied_vol(c, t, k);
}

double cashflow_pv(const DiscountCurve& discount, std::span<const Cashflow> flows) {
    double pv = 0.0;
    for (const auto& f : flows) {
        if (f.t < 0.0) fail(ErrorCode::invalid_input, "cash flow dated before valuation");
        pv += f.amount * discount.df(f.t);
    }
    return pv;
}

}  // namespace futsmile
