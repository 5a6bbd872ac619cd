#pragma once

#include "futsmile/market_data.hpp"
#include "futsmile/spot_model.hpp"

#include <span>

namespace futsmile {

enum class OptionType { call, put };

/// Future-style premium (paid at expiry, no discounting): F_0(T) e^{-A(t,T)} c(t, k_F).
double price_vanilla_future_style(const CalibratedSpotModel& model, double t, double T, double K,
                                  OptionType type = OptionType::call);

/// Equity-style premium: future-style premium times P_0(T_p).
double price_vanilla_equity_style(const CalibratedSpotModel& model, double t, double T, double K, double T_p,
                                  OptionType type = OptionType::call);

double price_vanilla(const CalibratedSpotModel& model, double t, double T, double K, MarginStyle style, double T_p,
                     OptionType type = OptionType::call);

/// Black vol of a futures option from its premium; equity-style premiums are deflated by P_0(T_p) first.
double implied_vol_from_price(double premium, double t, double F0T, double K, OptionType type = OptionType::call,
                              double discount = 1.0);

struct Cashflow {
    double t;  ///< year fraction from valuation
    double amount;
};

/// Sum of amount * P_0(t); throws for flows before valuation.
double cashflow_pv(const DiscountCurve& discount, std::span<const Cashflow> flows);

}  // namespace futsmile
