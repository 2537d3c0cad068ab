#pragma once

#include <Eigen/Core>
#include <vector>

namespace fqte {

/// Two-sample fusion dataset. Rows 0..n-1 are the validation sample with
/// full covariates (x, s); rows n..N-1 are the auxiliary sample where only
/// x is observed. Immutable by convention after create().
struct FusedDataset {
    Eigen::VectorXd y;  // outcomes, length N
    Eigen::VectorXi t;  // binary treatment, length N
    Eigen::MatrixXd x;  // common covariates, N x p_x
    Eigen::MatrixXd s;  // validation-only covariates, n x p_s
    Eigen::Index n = 0;

    Eigen::Index N() const { return y.size(); }
    Eigen::Index px() const { return x.cols(); }
    Eigen::Index ps() const { return s.cols(); }

    /// n/N, always computed, never stored.
    double nu() const { return static_cast<double>(n) / static_cast<double>(N()); }

    /// Validates all structural invariants and returns the dataset.
    /// Throws DataError naming the violated constraint.
    static FusedDataset create(Eigen::VectorXd y, Eigen::VectorXi t,
                               Eigen::MatrixXd x, Eigen::MatrixXd s,
                               Eigen::Index n);
};

/// Target quantile level plus the ordered calibration levels.
struct QuantileSpec {
    double p = 0.5;
    std::vector<double> p_cal;  // strictly increasing, all in (0,1)

    static QuantileSpec single(double level) { return QuantileSpec{level, {level}}; }

    Eigen::Index d() const { return static_cast<Eigen::Index>(p_cal.size()); }

    /// Throws ConfigError on out-of-range or non-increasing levels.
    void validate() const;
};

}  // namespace fqte
