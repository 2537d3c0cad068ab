#pragma once

#include "fqte/dataset.hpp"
#include "fqte/drq.hpp"

#include <Eigen/Core>
#include <vector>

namespace fqte {

/// Calibration vector and the per-observation estimating-function values
/// behind it. Columns are ordered arm-1 block then arm-0 block, levels
/// ascending within each block, matching the stacked calibration vector.
struct CalibrationResult {
    Eigen::VectorXd c_hat;           // length 2d
    Eigen::MatrixXd phi_validation;  // n x 2d
    Eigen::MatrixXd phi_entire;      // N x 2d
    Eigen::VectorXd conf_quantiles;  // length 2d
    std::vector<DrQuantileResult> conf_solves;

    Eigen::Index d() const { return c_hat.size() / 2; }
};

/// Solves the pooled pseudo-quantiles for every calibration level, evaluates
/// the confounded estimating function on all rows at the pooled estimates,
/// and averages the leading n_validation rows (index-ascending compensated
/// summation) into the calibration vector.
CalibrationResult calibration_from_rows(const ContextPair& pooled,
                                        const QuantileSpec& spec,
                                        Eigen::Index n_validation);

/// Calibration against the dataset's validation block. The contexts must be
/// X-only fits on the pooled sample.
CalibrationResult compute_calibration(const FusedDataset& ds, const QuantileSpec& spec,
                                      const ContextPair& pooled);

}  // namespace fqte
