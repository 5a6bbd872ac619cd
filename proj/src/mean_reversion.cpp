#include "futsmile/mean_reversion.hpp"

#include "futsmile/error.hpp"

#include <algorithm>
#include <cmath>

namespace futsmile {

MeanReversion::MeanReversion(double constant) : MeanReversion({}, {constant}) {}

MeanReversion::MeanReversion(std::vector<double> breakpoints, std::vector<double> values)
    : breakpoints_(std::move(breakpoints)), values_(std::move(values)) {
    if (values_.size() != breakpoints_.size() + 1)
        fail(ErrorCode::invalid_input, "mean reversion needs one more value than breakpoints");
    for (double v : values_)
        if (!(v >= 0.0) || !std::isfinite(v)) fail(ErrorCode::invalid_input, "mean-reversion speed must be >= 0");
    double prev = 0.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < breakpoints_.size(); ++i) {
        if (!(breakpoints_[i] > prev)) fail(ErrorCode::invalid_input, "mean-reversion breakpoints must increase from 0");
        acc += values_[i] * (breakpoints_[i] - prev);
        cumulative_.push_back(acc);
        prev = breakpoints_[i];
    }
}

double MeanReversion::operator()(double t) const {
    auto it = std::upper_bound(breakpoints_.begin(), breakpoints_.end(), t);
    return values_[static_cast<std::size_t>(it - breakpoints_.begin())];
}

double MeanReversion::primitive(double t) const {
    auto it = std::upper_bound(breakpoints_.begin(), breakpoints_.end(), t);
    const auto i = static_cast<std::size_t>(it - breakpoints_.begin());
    const double start = i == 0 ? 0.0 : breakpoints_[i - 1];
    const double base = i == 0 ? 0.0 : cumulative_[i - 1];
    return base + values_[i] * (t - start);
}

double MeanReversion::integral(double t, double T) const {
    if (breakpoints_.empty()) return values_[0] * (T - t);
    return primitive(T) - primitive(t);
}

bool MeanReversion::is_zero() const {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return v == 0.0; });
}

double MeanReversion::max_value() const { return *std::max_element(values_.begin(), values_.end()); }

}  // namespace futsmile
