#pragma once

#include "fqte/calib.hpp"
#include "fqte/dataset.hpp"
#include "fqte/drq.hpp"
#include "fqte/fuse.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <vector>

namespace fqte {

struct EstimateOptions {
    QuantileSpec spec = QuantileSpec::single(0.5);
    double confidence = 0.95;
    bool normalize_weights = true;
    bool center_rho = false;
    bool intercept = true;
    // Defaults to linear maps on (x, s); simulation scenarios substitute here.
    std::optional<FeatureMap> outcome_map;
    std::optional<FeatureMap> ps_map;
    std::vector<Eigen::VectorXd> delta_grid;
};

struct ArmEstimate {
    DrQuantileResult quantile;
    DensityEstimate density;
};

struct EstimateOutput {
    ArmEstimate arm1, arm0;
    Eigen::VectorXd psi1, psi0;  // influence values on validation rows
    CalibrationResult calib;
    CovarianceEstimates cov;
    FqteResult fqte;
    std::vector<SensitivityPoint> sensitivity;
    Eigen::Index n = 0, N = 0;
    double p = 0.5;
    std::vector<double> p_cal;
    std::size_t clamped_weights = 0;

    double se_v() const;  // sqrt(sigma_v^2 / n)
};

/// Full pipeline: fit validation and pooled working models, solve the
/// quantiles on both samples, estimate densities and influence values,
/// calibrate, estimate covariances, fuse, and optionally trace the
/// sensitivity curve.
EstimateOutput run_estimate(const FusedDataset& ds, const EstimateOptions& options);

/// Canonical JSON document for one estimate.
nlohmann::json result_json(const EstimateOutput& out);

}  // namespace fqte
