#include "fqte/models.hpp"

#include "fqte/errors.hpp"
#include "fqte/mathutil.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace fqte {

FeatureMap FeatureMap::linear_xs(Eigen::Index px, Eigen::Index ps, bool intercept) {
    FeatureMap map;
    map.kind = Kind::FullXS;
    map.name = intercept ? "linear_xs" : "linear_xs_no_intercept";
    map.dim = (intercept ? 1 : 0) + px + ps;
    map.fn = [px, ps, intercept](const Eigen::VectorXd& x, const Eigen::VectorXd& s) {
        Eigen::VectorXd d((intercept ? 1 : 0) + px + ps);
        Eigen::Index k = 0;
        if (intercept) d[k++] = 1.0;
        d.segment(k, px) = x.head(px);
        d.segment(k + px, ps) = s.head(ps);
        return d;
    };
    return map;
}

FeatureMap FeatureMap::linear_x(Eigen::Index px, bool intercept) {
    FeatureMap map;
    map.kind = Kind::XOnly;
    map.name = intercept ? "linear_x" : "linear_x_no_intercept";
    map.dim = (intercept ? 1 : 0) + px;
    map.fn = [px, intercept](const Eigen::VectorXd& x, const Eigen::VectorXd&) {
        Eigen::VectorXd d((intercept ? 1 : 0) + px);
        Eigen::Index k = 0;
        if (intercept) d[k++] = 1.0;
        d.segment(k, px) = x.head(px);
        return d;
    };
    return map;
}

Eigen::MatrixXd design_matrix(const FusedDataset& ds, const FeatureMap& map, Rows rows) {
    if (map.kind == FeatureMap::Kind::FullXS && rows == Rows::All) {
        throw ConfigError("full-covariate feature map cannot be applied to auxiliary rows");
    }
    const Eigen::Index m = rows == Rows::Validation ? ds.n : ds.N();
    Eigen::MatrixXd design(m, map.dim);
    Eigen::VectorXd empty;
    for (Eigen::Index i = 0; i < m; ++i) {
        const Eigen::VectorXd xi = ds.x.row(i).transpose();
        if (map.kind == FeatureMap::Kind::FullXS) {
            design.row(i) = map.fn(xi, ds.s.row(i).transpose()).transpose();
        } else {
            design.row(i) = map.fn(xi, empty).transpose();
        }
    }
    return design;
}

namespace {
inline double logistic(double v) { return 1.0 / (1.0 + std::exp(-v)); }

// log(1 + exp(v)) without overflow.
inline double softplus(double v) {
    return v > 0.0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v));
}
}  // namespace

LogisticFit fit_logistic(const Eigen::MatrixXd& design, const Eigen::VectorXi& labels) {
    const Eigen::Index m = design.rows();
    const Eigen::Index k = design.cols();
    if (labels.size() != m) throw ConfigError("fit_logistic: label count mismatch");
    if (m < k) throw FitError("fit_logistic: fewer rows than coefficients");
    const int first = labels[0];
    bool all_equal = true;
    for (Eigen::Index i = 1; i < m; ++i) {
        if (labels[i] != first) {
            all_equal = false;
            break;
        }
    }
    if (all_equal) throw FitError("fit_logistic: labels are all identical");

    const Eigen::VectorXd yd = labels.cast<double>();
    Eigen::VectorXd alpha = Eigen::VectorXd::Zero(k);

    auto neg_loglik = [&](const Eigen::VectorXd& a) {
        const Eigen::VectorXd eta = design * a;
        double nll = 0.0;
        for (Eigen::Index i = 0; i < m; ++i) nll += softplus(eta[i]) - yd[i] * eta[i];
        return nll / static_cast<double>(m);
    };

    const double tol = 1e-8;
    const int max_iter = 100;
    double nll = neg_loglik(alpha);
    bool converged = false;
    int iter = 0;
    for (; iter < max_iter; ++iter) {
        const Eigen::VectorXd eta = design * alpha;
        Eigen::VectorXd e(m), v(m);
        for (Eigen::Index i = 0; i < m; ++i) {
            e[i] = logistic(eta[i]);
            v[i] = e[i] * (1.0 - e[i]);
        }
        const Eigen::VectorXd grad = design.transpose() * (e - yd) / static_cast<double>(m);
        if (grad.lpNorm<Eigen::Infinity>() < tol) {
            converged = true;
            break;
        }
        const Eigen::MatrixXd hess =
            design.transpose() * v.asDiagonal() * design / static_cast<double>(m);
        Eigen::FullPivLU<Eigen::MatrixXd> lu(hess);
        if (!lu.isInvertible()) {
            throw FitError("fit_logistic: singular Hessian");
        }
        const Eigen::VectorXd step = lu.solve(grad);
        double lambda = 1.0;
        Eigen::VectorXd candidate;
        double cand_nll = 0.0;
        bool improved = false;
        for (int h = 0; h < 40; ++h) {
            candidate = alpha - lambda * step;
            cand_nll = neg_loglik(candidate);
            if (cand_nll <= nll) {
                improved = true;
                break;
            }
            lambda *= 0.5;
        }
        if (!improved) break;
        alpha = candidate;
        nll = cand_nll;
        if (alpha.norm() > 1e4) {
            throw FitError("fit_logistic: perfect separation (coefficients diverged)");
        }
    }

    LogisticFit fit;
    fit.alpha = alpha;
    fit.converged = converged;
    fit.iterations = iter;
    fit.scores.resize(m, k);
    for (Eigen::Index i = 0; i < m; ++i) {
        const double e = logistic(design.row(i).dot(alpha));
        fit.scores.row(i) = (yd[i] - e) * design.row(i);
    }
    fit.fisher = fit.scores.transpose() * fit.scores / static_cast<double>(m);
    return fit;
}

double propensity(const LogisticFit& fit, const Eigen::VectorXd& design_row) {
    return logistic(fit.alpha.dot(design_row));
}

Eigen::VectorXd propensity_grad(const LogisticFit& fit, const Eigen::VectorXd& design_row) {
    const double e = propensity(fit, design_row);
    return e * (1.0 - e) * design_row;
}

Eigen::VectorXd logistic_score(const LogisticFit& fit, int label,
                               const Eigen::VectorXd& design_row) {
    const double e = propensity(fit, design_row);
    return (static_cast<double>(label) - e) * design_row;
}

NormalLinearFit fit_normal_linear(const Eigen::MatrixXd& design,
                                  const Eigen::VectorXd& outcomes, int arm) {
    const Eigen::Index m = design.rows();
    const Eigen::Index k = design.cols();
    if (outcomes.size() != m) throw ConfigError("fit_normal_linear: outcome count mismatch");
    if (m < k + 1) throw FitError("fit_normal_linear: need at least columns + 1 rows");

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    if (qr.rank() < k) throw FitError("fit_normal_linear: rank-deficient design");
    const Eigen::VectorXd beta = qr.solve(outcomes);
    const Eigen::VectorXd resid = outcomes - design * beta;
    const double sigma_sq = resid.squaredNorm() / static_cast<double>(m);
    const double outcome_scale = std::sqrt(outcomes.squaredNorm() / static_cast<double>(m));
    if (!(sigma_sq > 1e-20 * std::max(1.0, outcome_scale * outcome_scale))) {
        throw FitError("fit_normal_linear: degenerate outcome model (zero residual scale)");
    }
    const double sigma = std::sqrt(sigma_sq);

    NormalLinearFit fit;
    fit.beta = beta;
    fit.sigma = sigma;
    fit.arm = arm;
    fit.scores.resize(m, k + 1);
    fit.hessian = Eigen::MatrixXd::Zero(k + 1, k + 1);
    const double inv_s2 = 1.0 / sigma_sq;
    const double inv_s3 = inv_s2 / sigma;
    const double inv_s4 = inv_s2 * inv_s2;
    for (Eigen::Index i = 0; i < m; ++i) {
        const double r = resid[i];
        fit.scores.block(i, 0, 1, k) = (r * inv_s2) * design.row(i);
        fit.scores(i, k) = (r * r - sigma_sq) * inv_s3;
        fit.hessian.topLeftCorner(k, k) -=
            inv_s2 * (design.row(i).transpose() * design.row(i));
        fit.hessian.block(0, k, k, 1) -= (2.0 * r * inv_s3) * design.row(i).transpose();
        fit.hessian.block(k, 0, 1, k) -= (2.0 * r * inv_s3) * design.row(i);
        fit.hessian(k, k) += inv_s2 - 3.0 * r * r * inv_s4;
    }
    fit.hessian /= static_cast<double>(m);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(fit.hessian);
    if (!lu.isInvertible()) throw FitError("fit_normal_linear: singular score Jacobian");
    return fit;
}

double conditional_cdf(const NormalLinearFit& fit, double y,
                       const Eigen::VectorXd& design_row) {
    return normal_cdf((y - fit.beta.dot(design_row)) / fit.sigma);
}

Eigen::VectorXd conditional_cdf_grad(const NormalLinearFit& fit, double y,
                                     const Eigen::VectorXd& design_row) {
    const Eigen::Index k = fit.beta.size();
    const double z = (y - fit.beta.dot(design_row)) / fit.sigma;
    const double dens = normal_pdf(z);
    Eigen::VectorXd grad(k + 1);
    grad.head(k) = (-dens / fit.sigma) * design_row;
    grad[k] = -dens * z / fit.sigma;
    return grad;
}

Eigen::VectorXd normal_linear_score(const NormalLinearFit& fit, double y,
                                    const Eigen::VectorXd& design_row) {
    const Eigen::Index k = fit.beta.size();
    const double r = y - fit.beta.dot(design_row);
    const double s2 = fit.sigma * fit.sigma;
    Eigen::VectorXd score(k + 1);
    score.head(k) = (r / s2) * design_row;
    score[k] = (r * r - s2) / (s2 * fit.sigma);
    return score;
}

Eigen::MatrixXd normal_linear_score_jacobian(const NormalLinearFit& fit, double y,
                                             const Eigen::VectorXd& design_row) {
    const Eigen::Index k = fit.beta.size();
    const double r = y - fit.beta.dot(design_row);
    const double s2 = fit.sigma * fit.sigma;
    Eigen::MatrixXd jac(k + 1, k + 1);
    jac.topLeftCorner(k, k) = -(design_row * design_row.transpose()) / s2;
    jac.block(0, k, k, 1) = -(2.0 * r / (s2 * fit.sigma)) * design_row;
    jac.block(k, 0, 1, k) = jac.block(0, k, k, 1).transpose();
    jac(k, k) = 1.0 / s2 - 3.0 * r * r / (s2 * s2);
    return jac;
}

}  // namespace fqte
