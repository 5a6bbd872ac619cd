#include "futsmile/spot_model.hpp"

#include "futsmile/error.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace futsmile {

namespace {

void check_interval(double t, double T) {
    if (T < t) {
        std::ostringstream os;
        os << "negative time interval: t=" << t << " > T=" << T;
        fail(ErrorCode::invalid_input, os.str());
    }
}

}  // namespace

double effective_strike(const MeanReversion& a, double t, double T, double K, double F0T) {
    check_interval(t, T);
    if (!(F0T > 0.0)) fail(ErrorCode::invalid_input, "futures price must be positive");
    return 1.0 - std::exp(a.integral(t, T)) * (1.0 - K / F0T);
}

double futures_from_spot(const MeanReversion& a, double F0T, double t, double T, double s) {
    check_interval(t, T);
    return F0T * (1.0 - (1.0 - s) * std::exp(-a.integral(t, T)));
}

double absorbing_level(const MeanReversion& a, double t, double T, double F0T) {
    check_interval(t, T);
    return F0T * -std::expm1(-a.integral(t, T));
}

double futures_local_vol(const LocalVol& eta, const MeanReversion& a, double t, double T, double K, double F0T) {
    const double level = absorbing_level(a, t, T, F0T);
    if (K < level) {
        std::ostringstream os;
        os << "strike " << K << " below absorbing level " << level;
        fail(ErrorCode::invalid_input, os.str());
    }
    if (K == level) return 0.0;
    return (K - level) * eta(t, effective_strike(a, t, T, K, F0T));
}

std::vector<double> CalibratedSpotModel::required_times(const MarketData& market, const LocalVolSurface& eta) {
    std::vector<double> times;
    for (const auto& q : market.quotes.rows) times.push_back(q.expiry);
    for (const auto& p : eta.pillars()) times.push_back(p.t);
    std::sort(times.begin(), times.end());
    times.erase(std::unique(times.begin(), times.end(), [](double x, double y) { return std::abs(x - y) <= 1e-12; }), times.end());
    return times;
}

PdeGrid model_grid(const MarketData& market, const MeanReversion& a, const LocalVolSurface& eta, const PdeGridSpec& spec) {
    double max_k = 1.0;
    for (const auto& q : market.quotes.rows) {
        const double F0T = market.futures(q.t_last);
        max_k = std::max(max_k, effective_strike(a, q.expiry, q.t_last, q.strike, F0T));
    }
    for (const auto& p : eta.pillars()) max_k = std::max(max_k, p.k.back());
    double sigma = 0.0;
    for (const auto& p : eta.pillars()) {
        // ATM-region level sets the tail width; extreme wing nodes would make the grid needlessly wide.
        const auto it = std::lower_bound(p.k.begin(), p.k.end(), 1.0);
        const std::size_t j = it == p.k.end() ? p.k.size() - 1 : static_cast<std::size_t>(it - p.k.begin());
        sigma = std::max(sigma, p.eta[j]);
        if (j > 0) sigma = std::max(sigma, p.eta[j - 1]);
    }
    if (sigma <= 0.0) sigma = 0.2;
    return PdeGrid::build(spec, CalibratedSpotModel::required_times(market, eta), sigma, max_k);
}

CalibratedSpotModel::CalibratedSpotModel(MarketData market, MeanReversion a, LocalVolSurface eta, PdeGridSpec grid_spec)
    : market_(std::move(market)), a_(std::move(a)), eta_(std::move(eta)), grid_spec_(grid_spec) {
    const PdeGrid grid = model_grid(market_, a_, eta_, grid_spec_);
    calls_ = std::make_shared<const CallSurface>(solve_dupire(eta_, a_, grid));
}

CalibratedSpotModel::CalibratedSpotModel(MarketData market, MeanReversion a, LocalVolSurface eta, PdeGridSpec grid_spec,
                                         std::shared_ptr<const CallSurface> calls)
    : market_(std::move(market)), a_(std::move(a)), eta_(std::move(eta)), grid_spec_(grid_spec), calls_(std::move(calls)) {
    if (!calls_) fail(ErrorCode::invalid_input, "missing call surface");
}

double CalibratedSpotModel::normalized_call(double t, double k) const { return (*calls_)(t, k); }

double CalibratedSpotModel::futures_local_vol(double t, double T, double K) const {
    return futsmile::futures_local_vol(eta_, a_, t, T, K, market_.futures(T));
}

double CalibratedSpotModel::spot_moment(double t, int order) const {
    if (t < 0.0) fail(ErrorCode::invalid_input, "moment time must be non-negative");
    if (order == 1) return 1.0;
    if (order != 2) fail(ErrorCode::unsupported, "only moments of order 1 and 2 are available");
    if (t == 0.0) return 1.0;
    if (t > calls_->horizon() + 1e-12) fail(ErrorCode::out_of_range, "moment time beyond calibrated horizon");
    const long node = calls_->node_index(t);
    if (node >= 0) return second_moment(*calls_, t);
    const auto times = calls_->times();
    const auto hi = static_cast<std::size_t>(std::upper_bound(times.begin(), times.end(), t) - times.begin());
    const double w = (t - times[hi - 1]) / (times[hi] - times[hi - 1]);
    return (1.0 - w) * second_moment(*calls_, times[hi - 1]) + w * second_moment(*calls_, times[hi]);
}

double CalibratedSpotModel::terminal_correlation_onefactor(double t, double T1, double T2) const {
    check_interval(t, std::min(T1, T2));
    return 1.0;
}

}  // namespace futsmile
