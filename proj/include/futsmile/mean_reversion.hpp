#pragma once

#include <span>
#include <vector>

namespace futsmile {

/// Piecewise-constant mean-reversion speed a(t) >= 0 with closed-form integrals.
///
/// `values[i]` applies on [breakpoints[i-1], breakpoints[i]) with an implicit first
/// breakpoint at 0; the last value extends to infinity.
class MeanReversion {
public:
    MeanReversion() : MeanReversion(0.0) {}
    explicit MeanReversion(double constant);
    MeanReversion(std::vector<double> breakpoints, std::vector<double> values);

    [[nodiscard]] double operator()(double t) const;

    /// A(t,T) = int_t^T a(u) du (signed).
    [[nodiscard]] double integral(double t, double T) const;

    [[nodiscard]] std::span<const double> breakpoints() const { return breakpoints_; }
    [[nodiscard]] std::span<const double> values() const { return values_; }
    [[nodiscard]] bool is_zero() const;
    [[nodiscard]] double max_value() const;

private:
    [[nodiscard]] double primitive(double t) const;

    std::vector<double> breakpoints_;
    std::vector<double> values_;
    std::vector<double> cumulative_;  // primitive at each breakpoint
};

}  // namespace futsmile
