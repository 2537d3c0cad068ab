#include "fqte/dataset.hpp"

#include "fqte/errors.hpp"

#include <cmath>
#include <string>

namespace fqte {

FusedDataset FusedDataset::create(Eigen::VectorXd y, Eigen::VectorXi t,
                                  Eigen::MatrixXd x, Eigen::MatrixXd s,
                                  Eigen::Index n) {
    const Eigen::Index N = y.size();
    if (n < 1) throw DataError("dataset: validation sample is empty");
    if (N <= n) throw DataError("dataset: auxiliary sample is empty (N must exceed n)");
    if (t.size() != N || x.rows() != N) {
        throw DataError("dataset: y, t, x row counts disagree");
    }
    if (s.rows() != n) throw DataError("dataset: s must have one row per validation record");
    if (s.cols() < 1) throw DataError("dataset: s must have at least one column");

    for (Eigen::Index i = 0; i < N; ++i) {
        if (t[i] != 0 && t[i] != 1) {
            throw DataError("dataset: non-binary treatment at row " + std::to_string(i + 1));
        }
        if (!std::isfinite(y[i])) {
            throw DataError("dataset: non-finite outcome at row " + std::to_string(i + 1));
        }
    }
    if (!x.allFinite()) throw DataError("dataset: non-finite value in x");
    if (!s.allFinite()) throw DataError("dataset: non-finite value in s");

    int arm1_val = 0, arm0_val = 0;
    for (Eigen::Index i = 0; i < n; ++i) (t[i] == 1 ? arm1_val : arm0_val)++;
    if (arm1_val == 0 || arm0_val == 0) {
        throw DataError("dataset: empty treatment arm in the validation sample");
    }

    FusedDataset ds;
    ds.y = std::move(y);
    ds.t = std::move(t);
    ds.x = std::move(x);
    ds.s = std::move(s);
    ds.n = n;
    return ds;
}

void QuantileSpec::validate() const {
    if (!(p > 0.0 && p < 1.0)) {
        throw ConfigError("quantile level out of range: p = " + std::to_string(p));
    }
    if (p_cal.empty()) throw ConfigError("p_cal must contain at least one level");
    double prev = 0.0;
    for (double level : p_cal) {
        if (!(level > 0.0 && level < 1.0)) {
            throw ConfigError("quantile level out of range: p_cal contains " +
                              std::to_string(level));
        }
        if (level <= prev) throw ConfigError("p_cal must be strictly increasing");
        prev = level;
    }
}

}  // namespace fqte
