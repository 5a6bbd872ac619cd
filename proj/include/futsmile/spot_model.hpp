#pragma once

#include "futsmile/dupire_pde.hpp"
#include "futsmile/local_vol_surface.hpp"
#include "futsmile/market_data.hpp"
#include "futsmile/mean_reversion.hpp"

#include <memory>

namespace futsmile {

/// k_F = 1 - e^{A(t,T)} (1 - K / F_0(T)).
double effective_strike(const MeanReversion& a, double t, double T, double K, double F0T);

/// F_t(T) = F_0(T) (1 - (1 - s_t) e^{-A(t,T)}).
double futures_from_spot(const MeanReversion& a, double F0T, double t, double T, double s);

/// Lowest attainable F_t(T): F_0(T) (1 - e^{-A(t,T)}).
double absorbing_level(const MeanReversion& a, double t, double T, double F0T);

/// Absolute volatility of F_t(T) at level K: (K - absorbing level) * eta(t, k_F).
double futures_local_vol(const LocalVol& eta, const MeanReversion& a, double t, double T, double K, double F0T);

/// Market data, mean reversion and local volatility together with the solved call surface.
class CalibratedSpotModel {
public:
    CalibratedSpotModel(MarketData market, MeanReversion a, LocalVolSurface eta, PdeGridSpec grid_spec);
    /// Reuses an already solved surface (must come from the same inputs).
    CalibratedSpotModel(MarketData market, MeanReversion a, LocalVolSurface eta, PdeGridSpec grid_spec,
                        std::shared_ptr<const CallSurface> calls);

    [[nodiscard]] const MarketData& market() const { return market_; }
    [[nodiscard]] const FuturesCurve& curve() const { return market_.futures; }
    [[nodiscard]] const MeanReversion& mean_reversion() const { return a_; }
    [[nodiscard]] const LocalVolSurface& local_vol() const { return eta_; }
    [[nodiscard]] const PdeGridSpec& grid_spec() const { return grid_spec_; }
    [[nodiscard]] const CallSurface& calls() const { return *calls_; }

    /// c(t,k) of the normalized spot.
    [[nodiscard]] double normalized_call(double t, double k) const;

    /// eta_F(t,T,K) for the contract whose T^last is T.
    [[nodiscard]] double futures_local_vol(double t, double T, double K) const;

    /// E[s_t^order]; order 1 is exactly 1, order 2 is integrated from the call surface.
    [[nodiscard]] double spot_moment(double t, int order) const;

    /// Terminal correlation of two futures prices under the one-factor model (always 1).
    [[nodiscard]] double terminal_correlation_onefactor(double t, double T1, double T2) const;

    /// Maturities the PDE must hit exactly: quote expiries plus pillar times.
    static std::vector<double> required_times(const MarketData& market, const LocalVolSurface& eta);

private:
    MarketData market_;
    MeanReversion a_;
    LocalVolSurface eta_;
    PdeGridSpec grid_spec_;
    std::shared_ptr<const CallSurface> calls_;
};

/// Grid for a model: maturities from quotes and pillars, volatility scale from the surface.
PdeGrid model_grid(const MarketData& market, const MeanReversion& a, const LocalVolSurface& eta, const PdeGridSpec& spec);

}  // namespace futsmile
