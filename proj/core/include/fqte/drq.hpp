#pragma once

#include "fqte/dataset.hpp"
#include "fqte/models.hpp"

#include <Eigen/Core>
#include <string>
#include <utility>
#include <vector>

namespace fqte {

/// Working models plus the sample they were fitted on, for one treatment arm.
/// Weights are inverse-propensity weights with the propensity clamped to
/// [1e-3, 1-1e-3]; when normalize_weights is set they are rescaled so the
/// arm weights sum to the sample size (Hajek normalization).
struct EstimatingContext {
    int arm = 1;
    NormalLinearFit outcome_fit;
    LogisticFit ps_fit;
    FeatureMap outcome_map;
    FeatureMap ps_map;
    bool normalize_weights = true;
    double weight_scale = 1.0;   // Hajek factor applied to raw weights
    std::size_t clamp_count = 0; // rows where the propensity hit the clamp

    // Cached build sample.
    Eigen::VectorXd y;
    Eigen::VectorXi t;
    Eigen::MatrixXd or_design;
    Eigen::MatrixXd ps_design;
    Eigen::VectorXd e;        // clamped propensities
    Eigen::VectorXd weights;  // final arm weights
    std::vector<char> clamped;
    Eigen::VectorXd mu;       // or_design * beta

    Eigen::Index rows() const { return y.size(); }
};

struct ContextPair {
    EstimatingContext arm1;
    EstimatingContext arm0;

    const EstimatingContext& arm(int t) const { return t == 1 ? arm1 : arm0; }
};

/// Fits both working models on the requested rows and assembles the two
/// per-arm contexts (the propensity fit is shared). Rows::All requires
/// X-only feature maps; both maps must come from the same family.
ContextPair make_contexts(const FusedDataset& ds, Rows rows,
                          const FeatureMap& outcome_map, const FeatureMap& ps_map,
                          bool normalize_weights);

/// Estimating function on full covariates:
///   w_t {I(y <= q) - G_t(q|x,s)} + G_t(q|x,s) - p.
double psi_estimating_function(const EstimatingContext& ctx, double y, int t,
                               const Eigen::VectorXd& x, const Eigen::VectorXd& s,
                               double q, double p);

/// Confounded counterpart on common covariates only (z-weights, X-only model).
double phi_estimating_function(const EstimatingContext& ctx, double y, int t,
                               const Eigen::VectorXd& x, double q, double p);

/// Mean estimating function over the context's build sample.
double mean_estimating_function(const EstimatingContext& ctx, double q, double p);

struct DrQuantileResult {
    double q_hat = 0.0;
    int arm = 1;
    double level = 0.5;
    double residual = 0.0;                 // mean estimating function at q_hat
    std::pair<double, double> bracket{0.0, 0.0};
    std::string method;                    // "crossing" or "bisection-fallback"
};

/// Solves the empirical estimating equation by a generalized-inverse search
/// over the sorted unique outcomes: returns the smallest outcome value where
/// the mean estimating function first reaches zero from below. Falls back to
/// bisection on [min y - 1, max y + 1] when the grid has no such point, and
/// throws SolveError when no crossing exists on that interval either.
DrQuantileResult solve_dr_quantile(const EstimatingContext& ctx, double level);

struct DensityEstimate {
    int arm = 1;
    double value = 0.0;
    double bandwidth = 0.0;
    std::string kernel = "gaussian";
    bool floored = false;
};

/// Inverse-probability-weighted Gaussian KDE of the arm outcomes at q, with
/// self-normalized weights and Silverman bandwidth on the weighted sample.
/// The value is floored at 1e-6 (flagged). Requires >= 10 arm observations.
DensityEstimate estimate_density(const EstimatingContext& ctx, double q);

/// Per-observation influence values for the solved quantile: the estimating
/// function plus plug-in corrections for the fitted outcome and propensity
/// parameters, scaled by -1/f_hat. The fits must be the MLEs on the
/// context's build sample. Throws FitError when a correction matrix is
/// singular, reporting its condition.
Eigen::VectorXd influence_psi(const EstimatingContext& ctx, double q_hat,
                              double level, const DensityEstimate& density);

/// Influence columns collected per arm at one or more levels.
struct InfluenceSet {
    int arm = 1;
    Eigen::MatrixXd psi;  // rows x levels
};

}  // namespace fqte
