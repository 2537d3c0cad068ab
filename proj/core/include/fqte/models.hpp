#pragma once

#include "fqte/dataset.hpp"

#include <Eigen/Core>
#include <functional>
#include <string>

namespace fqte {

/// Deterministic map from raw covariates to a design vector (intercept
/// included by the built-in maps). FullXS maps see (x, s); XOnly maps see x.
struct FeatureMap {
    enum class Kind { FullXS, XOnly };

    Kind kind = Kind::FullXS;
    std::string name;
    Eigen::Index dim = 0;
    std::function<Eigen::VectorXd(const Eigen::VectorXd& x, const Eigen::VectorXd& s)> fn;

    Eigen::VectorXd operator()(const Eigen::VectorXd& x, const Eigen::VectorXd& s) const {
        return fn(x, s);
    }
    Eigen::VectorXd operator()(const Eigen::VectorXd& x) const {
        return fn(x, Eigen::VectorXd());
    }

    /// (1, x..., s...) on full covariates.
    static FeatureMap linear_xs(Eigen::Index px, Eigen::Index ps, bool intercept = true);
    /// (1, x...) on common covariates only.
    static FeatureMap linear_x(Eigen::Index px, bool intercept = true);
};

enum class Rows { Validation, All };

/// Stacks the feature map over the requested rows. FullXS maps require
/// Rows::Validation since s is unobserved on the auxiliary sample.
Eigen::MatrixXd design_matrix(const FusedDataset& ds, const FeatureMap& map, Rows rows);

/// Logistic regression MLE with per-observation scores h_i = (t_i - e_i) d_i
/// and Fisher information (1/m) sum h_i h_i'.
struct LogisticFit {
    Eigen::VectorXd alpha;
    Eigen::MatrixXd scores;  // m x k
    Eigen::MatrixXd fisher;  // k x k
    bool converged = false;
    int iterations = 0;
};

/// Newton iterations with step-halving; tolerance 1e-8 on the mean-gradient
/// infinity norm, at most 100 iterations. Throws FitError on constant labels,
/// perfect separation (coefficient norm above 1e4) or a singular Hessian.
LogisticFit fit_logistic(const Eigen::MatrixXd& design, const Eigen::VectorXi& labels);

double propensity(const LogisticFit& fit, const Eigen::VectorXd& design_row);
/// d e(d;alpha) / d alpha = e (1 - e) d.
Eigen::VectorXd propensity_grad(const LogisticFit& fit, const Eigen::VectorXd& design_row);
/// Score contribution (t - e) d of one observation.
Eigen::VectorXd logistic_score(const LogisticFit& fit, int label,
                               const Eigen::VectorXd& design_row);

/// Normal linear outcome model for one treatment arm, parameterized as
/// theta = (beta, sigma). sigma is the MLE scale (divisor = row count).
struct NormalLinearFit {
    Eigen::VectorXd beta;
    double sigma = 0.0;
    int arm = -1;
    Eigen::MatrixXd scores;   // m x (k+1), per-observation score of (beta, sigma)
    Eigen::MatrixXd hessian;  // (k+1) x (k+1), mean per-observation d score / d theta'
};

/// Least squares plus analytic sigma. Throws FitError on rank deficiency,
/// too few rows, or an exact fit (degenerate outcome model).
NormalLinearFit fit_normal_linear(const Eigen::MatrixXd& design,
                                  const Eigen::VectorXd& outcomes, int arm = -1);

/// G(y | d; theta) = Phi((y - beta'd) / sigma).
double conditional_cdf(const NormalLinearFit& fit, double y,
                       const Eigen::VectorXd& design_row);
/// Gradient of conditional_cdf with respect to theta = (beta, sigma).
Eigen::VectorXd conditional_cdf_grad(const NormalLinearFit& fit, double y,
                                     const Eigen::VectorXd& design_row);
/// Log-likelihood score of one observation at the fitted parameters.
Eigen::VectorXd normal_linear_score(const NormalLinearFit& fit, double y,
                                    const Eigen::VectorXd& design_row);
/// Per-observation derivative of the score (log-likelihood Hessian).
Eigen::MatrixXd normal_linear_score_jacobian(const NormalLinearFit& fit, double y,
                                             const Eigen::VectorXd& design_row);

}  // namespace fqte
