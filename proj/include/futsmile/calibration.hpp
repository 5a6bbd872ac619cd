#pragma once

#include "futsmile/dupire_pde.hpp"
#include "futsmile/local_vol_surface.hpp"
#include "futsmile/market_data.hpp"
#include "futsmile/mean_reversion.hpp"
#include "futsmile/spot_model.hpp"

#include <optional>
#include <vector>

namespace futsmile {

/// One option quote mapped into normalized-spot space.
struct NormalizedQuote {
    std::size_t source = 0;     ///< row in the quote set
    double t = 0.0;             ///< option expiry
    double T = 0.0;             ///< contract T^last
    double K = 0.0;             ///< absolute strike
    double F0T = 0.0;
    double A = 0.0;             ///< A(t, T)
    double k = 0.0;             ///< effective strike
    double sigma_market = 0.0;  ///< quoted futures-option Black vol
    double sigma_norm = 0.0;    ///< Black vol of the normalized call with the same premium
};

struct QuotePillar {
    double t = 0.0;
    std::vector<std::size_t> quotes;  ///< indices into QuoteGrid::quotes, ascending in k
    std::size_t atm = 0;              ///< position within `quotes` nearest to k = 1 (ties to the lower strike)
    bool atm_is_wing = false;         ///< every quote lies on one side of k = 1
};

struct QuoteGrid {
    std::vector<NormalizedQuote> quotes;
    std::vector<QuotePillar> pillars;

    /// Surface with one node per quote; node values default to the normalized market vols.
    [[nodiscard]] LocalVolSurface surface(TimeInterpolation interpolation, LocalVolBounds bounds,
                                          std::optional<std::vector<double>> nodes = std::nullopt) const;
    /// Market normalized vols in node order (pillar by pillar, ascending k).
    [[nodiscard]] std::vector<double> market_nodes() const;
};

/// Normalizes every quote; throws when an effective strike is not positive or a premium leaves the Black band.
QuoteGrid normalize_quotes(const MarketData& market, const MeanReversion& a);

/// Model vols at the quotes, in node order.
struct QuoteFit {
    std::vector<double> sigma_norm;    ///< model normalized implied vol
    std::vector<double> sigma_market;  ///< model futures-option implied vol
    std::vector<double> error_bp;      ///< |model - market| futures vol, basis points
    double max_bp = 0.0;
    double rms_bp = 0.0;
};

QuoteFit evaluate_quotes(const CallSurface& calls, const QuoteGrid& grid);

enum class UpdateRule { level_and_skew, level_only };

/// One level/skew correction of the node values given the model vols of the current nodes.
std::vector<double> fixed_point_step(const std::vector<double>& nodes, const QuoteGrid& grid, const QuoteFit& model,
                                     UpdateRule rule = UpdateRule::level_and_skew);

struct CalibrationConfig {
    int max_iterations = 50;
    double tolerance_bp = 0.01;         ///< internal stopping threshold
    double threshold_bp = 0.1;          ///< convergence criterion for the reported error
    std::size_t aa_memory = 5;
    double aa_ridge = 1e-10;
    UpdateRule rule = UpdateRule::level_and_skew;
    TimeInterpolation time_interpolation = TimeInterpolation::total_variance;
    LocalVolBounds bounds;
    PdeGridSpec grid;
    double clip_damping = 0.5;
};

struct IterationRecord {
    int iteration = 0;
    double max_bp = 0.0;
    double rms_bp = 0.0;
    std::size_t aa_depth = 0;
    bool aa_fallback = false;
    std::size_t clipped = 0;
    bool damped = false;
};

struct CalibrationReport {
    std::vector<IterationRecord> history;  ///< history[i] describes iterate i
    std::vector<double> final_nodes;
    std::vector<double> final_errors_bp;
    int iterations = 0;                    ///< fixed-point updates applied
    bool converged = false;
    double final_max_bp = 0.0;
    double max_strike_slope = 0.0;
    std::vector<double> wing_atm_pillars;  ///< pillar times whose ATM node is a wing node

    /// First iterate with max error <= bp, or -1.
    [[nodiscard]] int iterations_to(double bp) const;
};

struct CalibrationResult {
    CalibratedSpotModel model;
    CalibrationReport report;
};

/// Fixed-point calibration of the local-vol nodes with Anderson mixing; one PDE solve per iteration.
CalibrationResult calibrate(const MarketData& market, const MeanReversion& a, const CalibrationConfig& config,
                            std::optional<std::vector<double>> initial_nodes = std::nullopt);

}  // namespace futsmile
