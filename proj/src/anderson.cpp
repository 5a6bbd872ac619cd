#include "futsmile/anderson.hpp"

#include "futsmile/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace futsmile {

AndersonAccelerator::AndersonAccelerator(std::size_t memory, double ridge) : memory_(memory), ridge_(ridge) {
    if (!(ridge >= 0.0)) fail(ErrorCode::invalid_input, "Anderson ridge must be non-negative");
}

void AndersonAccelerator::reset() {
    images_.clear();
    residuals_.clear();
    last_depth_ = 0;
    last_fallback_ = false;
    last_weights_.clear();
}

std::vector<double> AndersonAccelerator::next(const std::vector<double>& x, const std::vector<double>& fx) {
    if (x.size() != fx.size()) fail(ErrorCode::invalid_input, "Anderson iterate and image sizes differ");
    last_fallback_ = false;
    last_depth_ = 0;
    last_weights_.assign(1, 1.0);
    if (memory_ == 0) return fx;

    std::vector<double> r(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) r[i] = fx[i] - x[i];
    images_.push_back(fx);
    residuals_.push_back(r);
    while (images_.size() > memory_ + 1) {
        images_.pop_front();
        residuals_.pop_front();
    }
    const std::size_t depth = images_.size() - 1;
    if (depth == 0) return fx;

    const auto n = static_cast<Eigen::Index>(x.size());
    const auto m = static_cast<Eigen::Index>(depth);
    Eigen::MatrixXd dR(n, m), dG(n, m);
    for (Eigen::Index j = 0; j < m; ++j) {
        const auto& r0 = residuals_[static_cast<std::size_t>(j)];
        const auto& r1 = residuals_[static_cast<std::size_t>(j) + 1];
        const auto& g0 = images_[static_cast<std::size_t>(j)];
        const auto& g1 = images_[static_cast<std::size_t>(j) + 1];
        for (Eigen::Index i = 0; i < n; ++i) {
            dR(i, j) = r1[static_cast<std::size_t>(i)] - r0[static_cast<std::size_t>(i)];
            dG(i, j) = g1[static_cast<std::size_t>(i)] - g0[static_cast<std::size_t>(i)];
        }
    }
    const Eigen::Map<const Eigen::VectorXd> rk(r.data(), n);
    Eigen::MatrixXd normal = dR.transpose() * dR;
    const double scale = normal.trace();
    if (!(scale > 0.0) || !std::isfinite(scale)) {
        last_fallback_ = true;
        return fx;
    }
    normal.diagonal().array() += ridge_ * scale;
    const Eigen::VectorXd rhs = dR.transpose() * rk;
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(normal);
    Eigen::VectorXd gamma = ldlt.solve(rhs);
    if (ldlt.info() != Eigen::Success || !gamma.allFinite()) {
        last_fallback_ = true;
        return fx;
    }
    const Eigen::VectorXd step = dG * gamma;
    std::vector<double> out(fx);
    for (Eigen::Index i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] -= step(i);
    if (!std::all_of(out.begin(), out.end(), [](double v) { return std::isfinite(v); })) {
        last_fallback_ = true;
        return fx;
    }
    // Weights on stored images: alpha_0 = gamma_0, alpha_j = gamma_j - gamma_{j-1}, alpha_m = 1 - gamma_{m-1}.
    last_depth_ = depth;
    last_weights_.assign(depth + 1, 0.0);
    last_weights_[0] = gamma(0);
    for (std::size_t j = 1; j < depth; ++j) last_weights_[j] = gamma(static_cast<Eigen::Index>(j)) - gamma(static_cast<Eigen::Index>(j) - 1);
    last_weights_[depth] = 1.0 - gamma(m - 1);
    return out;
}

FixedPointResult solve_fixed_point(const std::function<std::vector<double>(const std::vector<double>&)>& f,
                                   std::vector<double> x0, std::size_t memory, double tolerance, int max_iterations,
                                   double ridge) {
    AndersonAccelerator aa(memory, ridge);
    FixedPointResult out;
    out.x = std::move(x0);
    for (int it = 0;; ++it) {
        const std::vector<double> fx = f(out.x);
        double res = 0.0;
        for (std::size_t i = 0; i < fx.size(); ++i) res = std::max(res, std::abs(fx[i] - out.x[i]));
        out.residual = res;
        out.iterations = it;
        if (res <= tolerance) {
            out.converged = true;
            return out;
        }
        if (it >= max_iterations) return out;
        out.x = aa.next(out.x, fx);
    }
}

}  // namespace futsmile
