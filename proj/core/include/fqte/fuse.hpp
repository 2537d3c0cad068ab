#pragma once

#include "fqte/calib.hpp"

#include <Eigen/Core>
#include <utility>
#include <vector>

namespace fqte {

/// Plug-in covariance pieces for the joint distribution of the initial
/// estimator and the calibration vector.
struct CovarianceEstimates {
    Eigen::VectorXd rho_hat;       // length 2d
    Eigen::MatrixXd sigma_ep_hat;  // 2d x 2d
    double sigma_v_sq_hat = 0.0;
    double nu_n = 0.0;
};

/// rho_hat  = (1 - nu_n) (1/n) sum (psi1_i - psi0_i) phi_i      (validation rows)
/// Sigma_ep = (1 - nu_n) (1/N) sum phi_i phi_i'                 (all rows)
/// sigma_v  = (1/n) sum (psi1_i - psi0_i)^2
/// The cross moment is non-centered as displayed; center_rho subtracts the
/// sample means first.
CovarianceEstimates estimate_covariances(const Eigen::VectorXd& psi1,
                                         const Eigen::VectorXd& psi0,
                                         const CalibrationResult& calib, double nu_n,
                                         bool center_rho = false);

/// Fused estimate with variance, Wald interval and efficiency gain.
struct FqteResult {
    double delta_p = 0.0;
    double delta_v = 0.0;
    double sigma_sq = 0.0;
    double se = 0.0;
    std::pair<double, double> ci{0.0, 0.0};
    double efficiency_gain = 0.0;
    bool regularized = false;
    bool variance_floored = false;
    double confidence = 0.95;
};

/// delta_p = delta_v - rho' Sigma^{-1} C and sigma^2 = sigma_v^2 - rho' Sigma^{-1} rho,
/// solved through an eigendecomposition; eigenvalues below 1e-10 of the largest
/// are truncated (regularized = true). A numerically zero Sigma with nonzero
/// rho throws SolveError("calibration degenerate...").
FqteResult fuse_estimate(double delta_v, const CalibrationResult& calib,
                         const CovarianceEstimates& cov, Eigen::Index n,
                         double confidence = 0.95);

struct SensitivityPoint {
    Eigen::VectorXd delta;
    double estimate = 0.0;
    std::pair<double, double> ci{0.0, 0.0};
};

/// Modified estimates delta_v - rho' Sigma^{-1} (C - delta) over a grid of
/// heterogeneity vectors; the variance is unchanged.
std::vector<SensitivityPoint> sensitivity_curve(double delta_v,
                                                const CalibrationResult& calib,
                                                const CovarianceEstimates& cov,
                                                const std::vector<Eigen::VectorXd>& delta_grid,
                                                Eigen::Index n, double confidence = 0.95);

}  // namespace fqte
