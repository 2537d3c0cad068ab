#include "fqte/fuse.hpp"

#include "fqte/errors.hpp"
#include "fqte/mathutil.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace fqte {

CovarianceEstimates estimate_covariances(const Eigen::VectorXd& psi1,
                                         const Eigen::VectorXd& psi0,
                                         const CalibrationResult& calib, double nu_n,
                                         bool center_rho) {
    const Eigen::Index n = psi1.size();
    if (psi0.size() != n || calib.phi_validation.rows() != n) {
        throw ConfigError("estimate_covariances: dimension mismatch between psi and phi");
    }
    if (!(nu_n > 0.0 && nu_n < 1.0)) {
        throw ConfigError("estimate_covariances: nu_n must lie in (0,1)");
    }
    const Eigen::Index N = calib.phi_entire.rows();
    const Eigen::VectorXd psidiff = psi1 - psi0;
    const double one_minus_nu = 1.0 - nu_n;

    CovarianceEstimates cov;
    cov.nu_n = nu_n;
    cov.rho_hat = one_minus_nu / static_cast<double>(n) *
                  (calib.phi_validation.transpose() * psidiff);
    if (center_rho) {
        const double psid_mean = psidiff.mean();
        const Eigen::VectorXd phi_mean =
            calib.phi_validation.colwise().mean().transpose();
        cov.rho_hat -= one_minus_nu * psid_mean * phi_mean;
    }
    cov.sigma_ep_hat = one_minus_nu / static_cast<double>(N) *
                       (calib.phi_entire.transpose() * calib.phi_entire);
    cov.sigma_v_sq_hat = psidiff.squaredNorm() / static_cast<double>(n);
    return cov;
}

namespace {

// Truncated eigen-solve of the symmetric PSD system Sigma x = v.
struct PsdSolver {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig;
    double threshold = 0.0;
    bool regularized = false;
    bool zero = false;

    explicit PsdSolver(const Eigen::MatrixXd& sigma) : eig(sigma) {
        const double lambda_max = eig.eigenvalues().maxCoeff();
        if (!(lambda_max > 1e-30)) {
            zero = true;
            return;
        }
        threshold = 1e-10 * lambda_max;
        regularized = eig.eigenvalues().minCoeff() < threshold;
    }

    Eigen::VectorXd solve(const Eigen::VectorXd& v) const {
        const Eigen::VectorXd proj = eig.eigenvectors().transpose() * v;
        Eigen::VectorXd scaled = Eigen::VectorXd::Zero(v.size());
        for (Eigen::Index i = 0; i < v.size(); ++i) {
            if (eig.eigenvalues()[i] >= threshold) {
                scaled[i] = proj[i] / eig.eigenvalues()[i];
            }
        }
        return eig.eigenvectors() * scaled;
    }
};

}  // namespace

FqteResult fuse_estimate(double delta_v, const CalibrationResult& calib,
                         const CovarianceEstimates& cov, Eigen::Index n,
                         double confidence) {
    if (!(confidence > 0.0 && confidence < 1.0)) {
        throw ConfigError("fuse_estimate: confidence level out of range");
    }
    if (cov.rho_hat.size() != calib.c_hat.size() ||
        cov.sigma_ep_hat.rows() != calib.c_hat.size()) {
        throw ConfigError("fuse_estimate: covariance dimensions do not match c_hat");
    }

    FqteResult result;
    result.delta_v = delta_v;
    result.confidence = confidence;

    const PsdSolver solver(cov.sigma_ep_hat);
    double projection = 0.0;
    double gain = 0.0;
    if (solver.zero) {
        if (cov.rho_hat.lpNorm<Eigen::Infinity>() > 1e-30) {
            throw SolveError("fuse_estimate: calibration degenerate "
                             "(zero covariance matrix with nonzero cross moment)");
        }
    } else {
        const Eigen::VectorXd coeff = solver.solve(cov.rho_hat);
        projection = coeff.dot(calib.c_hat);
        gain = coeff.dot(cov.rho_hat);
        result.regularized = solver.regularized;
    }
    if (gain < 0.0) gain = 0.0;

    result.delta_p = delta_v - projection;
    result.efficiency_gain = gain;
    double sigma_sq = cov.sigma_v_sq_hat - gain;
    if (sigma_sq < 0.0) {
        sigma_sq = 0.0;
        result.variance_floored = true;
    }
    result.sigma_sq = sigma_sq;
    result.se = std::sqrt(sigma_sq / static_cast<double>(n));
    const double z = normal_quantile(0.5 + confidence / 2.0);
    result.ci = {result.delta_p - z * result.se, result.delta_p + z * result.se};
    return result;
}

std::vector<SensitivityPoint> sensitivity_curve(double delta_v,
                                                const CalibrationResult& calib,
                                                const CovarianceEstimates& cov,
                                                const std::vector<Eigen::VectorXd>& delta_grid,
                                                Eigen::Index n, double confidence) {
    const FqteResult base = fuse_estimate(delta_v, calib, cov, n, confidence);
    const PsdSolver solver(cov.sigma_ep_hat);
    Eigen::VectorXd coeff = Eigen::VectorXd::Zero(calib.c_hat.size());
    if (!solver.zero) coeff = solver.solve(cov.rho_hat);
    const double z = normal_quantile(0.5 + confidence / 2.0);

    std::vector<SensitivityPoint> curve;
    curve.reserve(delta_grid.size());
    for (const auto& delta : delta_grid) {
        if (delta.size() != calib.c_hat.size()) {
            throw ConfigError("sensitivity_curve: delta dimension does not match c_hat");
        }
        SensitivityPoint point;
        point.delta = delta;
        point.estimate = delta_v - coeff.dot(calib.c_hat - delta);
        point.ci = {point.estimate - z * base.se, point.estimate + z * base.se};
        curve.push_back(std::move(point));
    }
    return curve;
}

}  // namespace fqte
