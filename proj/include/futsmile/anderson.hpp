#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <vector>

namespace futsmile {

/// Anderson mixing for x = f(x) in difference form: gamma = argmin |r_k - dR gamma|^2 + lambda |gamma|^2,
/// x_{k+1} = f(x_k) - dG gamma, where r = f(x) - x. Memory 0 is the plain iteration.
class AndersonAccelerator {
public:
    explicit AndersonAccelerator(std::size_t memory = 5, double ridge = 1e-10);

    /// Next iterate from the current iterate and its image.
    std::vector<double> next(const std::vector<double>& x, const std::vector<double>& fx);

    /// Number of difference columns used by the last call.
    [[nodiscard]] std::size_t last_depth() const { return last_depth_; }
    /// True if the last call fell back to the plain step.
    [[nodiscard]] bool last_fallback() const { return last_fallback_; }
    /// Affine mixing weights of the last call (sum to 1, oldest first).
    [[nodiscard]] const std::vector<double>& last_weights() const { return last_weights_; }

    void reset();

private:
    std::size_t memory_;
    double ridge_;
    std::deque<std::vector<double>> images_;
    std::deque<std::vector<double>> residuals_;
    std::size_t last_depth_ = 0;
    bool last_fallback_ = false;
    std::vector<double> last_weights_;
};

struct FixedPointResult {
    std::vector<double> x;
    int iterations = 0;
    double residual = 0.0;  ///< max-norm of f(x) - x at the returned x
    bool converged = false;
};

/// Iterates until |f(x) - x|_inf <= tolerance.
FixedPointResult solve_fixed_point(const std::function<std::vector<double>(const std::vector<double>&)>& f,
                                   std::vector<double> x0, std::size_t memory, double tolerance, int max_iterations,
                                   double ridge = 1e-10);

}  // namespace futsmile
