#include "fqte/drq.hpp"

#include "fqte/errors.hpp"
#include "fqte/mathutil.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace fqte {

namespace {

constexpr double kPropensityClamp = 1e-3;

double clamp_propensity(double e, bool& hit) {
    if (e < kPropensityClamp) {
        hit = true;
        return kPropensityClamp;
    }
    if (e > 1.0 - kPropensityClamp) {
        hit = true;
        return 1.0 - kPropensityClamp;
    }
    return e;
}

double arm_weight(int arm, int t, double e_clamped) {
    return arm == 1 ? static_cast<double>(t) / e_clamped
                    : static_cast<double>(1 - t) / (1.0 - e_clamped);
}

EstimatingContext build_context(int arm, const NormalLinearFit& outcome_fit,
                                const LogisticFit& ps_fit, const FeatureMap& outcome_map,
                                const FeatureMap& ps_map, bool normalize,
                                const Eigen::VectorXd& y, const Eigen::VectorXi& t,
                                const Eigen::MatrixXd& or_design,
                                const Eigen::MatrixXd& ps_design) {
    EstimatingContext ctx;
    ctx.arm = arm;
    ctx.outcome_fit = outcome_fit;
    ctx.ps_fit = ps_fit;
    ctx.outcome_map = outcome_map;
    ctx.ps_map = ps_map;
    ctx.normalize_weights = normalize;
    ctx.y = y;
    ctx.t = t;
    ctx.or_design = or_design;
    ctx.ps_design = ps_design;

    const Eigen::Index m = y.size();
    ctx.e.resize(m);
    ctx.weights.resize(m);
    ctx.clamped.assign(static_cast<std::size_t>(m), 0);
    for (Eigen::Index i = 0; i < m; ++i) {
        bool hit = false;
        const double e = clamp_propensity(propensity(ps_fit, ps_design.row(i).transpose()), hit);
        ctx.e[i] = e;
        if (hit) {
            ctx.clamped[static_cast<std::size_t>(i)] = 1;
            ++ctx.clamp_count;
        }
        ctx.weights[i] = arm_weight(arm, t[i], e);
    }
    if (normalize) {
        const double total = ctx.weights.sum();
        if (!(total > 0.0)) throw FitError("context: arm weights sum to zero");
        ctx.weight_scale = static_cast<double>(m) / total;
        ctx.weights *= ctx.weight_scale;
    }
    ctx.mu = or_design * outcome_fit.beta;
    return ctx;
}

}  // namespace

ContextPair make_contexts(const FusedDataset& ds, Rows rows,
                          const FeatureMap& outcome_map, const FeatureMap& ps_map,
                          bool normalize_weights) {
    if (outcome_map.kind != ps_map.kind) {
        throw ConfigError("make_contexts: outcome and propensity maps must share a family");
    }
    const Eigen::MatrixXd or_design = design_matrix(ds, outcome_map, rows);
    const Eigen::MatrixXd ps_design = design_matrix(ds, ps_map, rows);
    const Eigen::Index m = or_design.rows();
    const Eigen::VectorXd y = ds.y.head(m);
    const Eigen::VectorXi t = ds.t.head(m);

    const LogisticFit ps_fit = fit_logistic(ps_design, t);

    std::vector<Eigen::Index> idx1, idx0;
    for (Eigen::Index i = 0; i < m; ++i) (t[i] == 1 ? idx1 : idx0).push_back(i);
    if (idx1.empty() || idx0.empty()) throw DataError("make_contexts: empty treatment arm");

    auto fit_arm = [&](const std::vector<Eigen::Index>& idx, int arm) {
        Eigen::MatrixXd d(static_cast<Eigen::Index>(idx.size()), or_design.cols());
        Eigen::VectorXd yy(static_cast<Eigen::Index>(idx.size()));
        for (std::size_t j = 0; j < idx.size(); ++j) {
            d.row(static_cast<Eigen::Index>(j)) = or_design.row(idx[j]);
            yy[static_cast<Eigen::Index>(j)] = y[idx[j]];
        }
        return fit_normal_linear(d, yy, arm);
    };

    const NormalLinearFit fit1 = fit_arm(idx1, 1);
    const NormalLinearFit fit0 = fit_arm(idx0, 0);

    ContextPair pair{build_context(1, fit1, ps_fit, outcome_map, ps_map, normalize_weights,
                                   y, t, or_design, ps_design),
                     build_context(0, fit0, ps_fit, outcome_map, ps_map, normalize_weights,
                                   y, t, or_design, ps_design)};
    return pair;
}

namespace {

double estfun_from_rows(const EstimatingContext& ctx, double y, int t,
                        const Eigen::VectorXd& or_row, const Eigen::VectorXd& ps_row,
                        double q, double p) {
    bool hit = false;
    const double e = clamp_propensity(propensity(ctx.ps_fit, ps_row), hit);
    const double w = ctx.weight_scale * arm_weight(ctx.arm, t, e);
    const double G = conditional_cdf(ctx.outcome_fit, q, or_row);
    const double indicator = y <= q ? 1.0 : 0.0;
    return w * (indicator - G) + G - p;
}

}  // namespace

double psi_estimating_function(const EstimatingContext& ctx, double y, int t,
                               const Eigen::VectorXd& x, const Eigen::VectorXd& s,
                               double q, double p) {
    if (ctx.outcome_map.kind != FeatureMap::Kind::FullXS) {
        throw ConfigError("psi_estimating_function requires a full-covariate context");
    }
    return estfun_from_rows(ctx, y, t, ctx.outcome_map(x, s), ctx.ps_map(x, s), q, p);
}

double phi_estimating_function(const EstimatingContext& ctx, double y, int t,
                               const Eigen::VectorXd& x, double q, double p) {
    if (ctx.outcome_map.kind != FeatureMap::Kind::XOnly) {
        throw ConfigError("phi_estimating_function requires an X-only context");
    }
    return estfun_from_rows(ctx, y, t, ctx.outcome_map(x), ctx.ps_map(x), q, p);
}

double mean_estimating_function(const EstimatingContext& ctx, double q, double p) {
    const Eigen::Index m = ctx.rows();
    const double inv_sigma = 1.0 / ctx.outcome_fit.sigma;
    double acc = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) {
        const double G = normal_cdf((q - ctx.mu[i]) * inv_sigma);
        const double indicator = ctx.y[i] <= q ? 1.0 : 0.0;
        acc += ctx.weights[i] * (indicator - G) + G;
    }
    return acc / static_cast<double>(m) - p;
}

namespace {

// Grid state for the crossing search. The mean estimating function times m
// splits as F(k) - Bminus(k) with F nondecreasing:
//   F(k)      = sum_i w_i I(y_i <= u_k) + sum_{w_i <= 1} (1 - w_i) G_i(u_k) - m p
//   Bminus(k) = sum_{w_i > 1} (w_i - 1) G_i(u_k)
// which allows whole index ranges to be certified negative from their
// endpoints, so the first nonnegative grid point is found without scanning.
struct CrossingGrid {
    const EstimatingContext& ctx;
    double level;
    std::vector<double> unique_y;
    std::vector<double> step;  // prefix sums of weights over sorted outcomes
    std::vector<double> jump;  // weight mass at each unique outcome
    std::vector<double> f_val;
    std::vector<double> bminus;
    std::vector<char> computed;
    double margin;

    CrossingGrid(const EstimatingContext& c, double p) : ctx(c), level(p) {
        const Eigen::Index m = ctx.rows();
        std::vector<Eigen::Index> order(static_cast<std::size_t>(m));
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(),
                  [&](Eigen::Index a, Eigen::Index b) { return ctx.y[a] < ctx.y[b]; });
        for (Eigen::Index j = 0; j < m; ++j) {
            const Eigen::Index i = order[static_cast<std::size_t>(j)];
            if (unique_y.empty() || ctx.y[i] > unique_y.back()) {
                unique_y.push_back(ctx.y[i]);
                step.push_back(step.empty() ? 0.0 : step.back());
                jump.push_back(0.0);
            }
            step.back() += ctx.weights[i];
            jump.back() += ctx.weights[i];
        }
        const std::size_t K = unique_y.size();
        f_val.assign(K, 0.0);
        bminus.assign(K, 0.0);
        computed.assign(K, 0);
        margin = 1e-10 * (static_cast<double>(m) + ctx.weights.sum());
    }

    // Smooth sums at an arbitrary point, split into the nondecreasing and
    // nonincreasing weight classes.
    void smooth_parts(double q, double& bplus, double& bm) const {
        const Eigen::Index m = ctx.rows();
        const double inv_sigma = 1.0 / ctx.outcome_fit.sigma;
        bplus = 0.0;
        bm = 0.0;
        for (Eigen::Index i = 0; i < m; ++i) {
            const double G = normal_cdf((q - ctx.mu[i]) * inv_sigma);
            const double w = ctx.weights[i];
            if (w <= 1.0) {
                bplus += (1.0 - w) * G;
            } else {
                bm += (w - 1.0) * G;
            }
        }
    }

    void ensure(std::size_t k) {
        if (computed[k]) return;
        double bplus = 0.0, bm = 0.0;
        smooth_parts(unique_y[k], bplus, bm);
        f_val[k] = step[k] + bplus - static_cast<double>(ctx.rows()) * level;
        bminus[k] = bm;
        computed[k] = 1;
    }

    double value(std::size_t k) {
        ensure(k);
        return f_val[k] - bminus[k];
    }

    double bplus_at(std::size_t k) {
        ensure(k);
        return f_val[k] - step[k] + static_cast<double>(ctx.rows()) * level;
    }

    // m-scaled estimating function at an arbitrary point, with the step part
    // taken from the prefix sums (left-continuous between outcomes).
    double value_at(double q) const {
        double bplus = 0.0, bm = 0.0;
        smooth_parts(q, bplus, bm);
        const std::size_t idx = static_cast<std::size_t>(
            std::upper_bound(unique_y.begin(), unique_y.end(), q) - unique_y.begin());
        const double stepped = idx == 0 ? 0.0 : step[idx - 1];
        return stepped + bplus - bm - static_cast<double>(ctx.rows()) * level;
    }

    // Smallest index with value >= 0 in [a,b], assuming all indices below a
    // are negative; -1 when the whole range is certifiably negative.
    long search(std::size_t a, std::size_t b) {
        ensure(a);
        ensure(b);
        if (f_val[b] - bminus[a] < -margin) return -1;
        if (a == b) return value(a) >= 0.0 ? static_cast<long>(a) : -1;
        const std::size_t mid = a + (b - a) / 2;
        const long left = search(a, mid);
        if (left >= 0) return left;
        return search(mid + 1, b);
    }

    // First sign change of the continuous piece on (lo, hi): coarse scan for
    // the first nonnegative point, then bisection inside that subinterval.
    // Returns the crossing point, or NaN when the scan stays negative.
    double interior_crossing(double lo, double hi, double hi_value) {
        const int cells = 64;
        double prev = lo;
        double found = std::numeric_limits<double>::quiet_NaN();
        for (int j = 1; j < cells; ++j) {
            const double q = lo + (hi - lo) * j / cells;
            if (value_at(q) >= 0.0) {
                found = q;
                break;
            }
            prev = q;
        }
        if (std::isnan(found)) {
            if (hi_value < 0.0) return std::numeric_limits<double>::quiet_NaN();
            found = hi;
        }
        double a = prev, b = found;
        const double tol = 1e-12 * (1.0 + std::abs(lo) + std::abs(hi));
        for (int it = 0; it < 100 && b - a > tol; ++it) {
            const double mid = 0.5 * (a + b);
            if (value_at(mid) >= 0.0) {
                b = mid;
            } else {
                a = mid;
            }
        }
        return b;
    }
};

}  // namespace

DrQuantileResult solve_dr_quantile(const EstimatingContext& ctx, double level) {
    if (!(level > 0.0 && level < 1.0)) {
        throw ConfigError("solve_dr_quantile: level out of range");
    }
    const Eigen::Index m = ctx.rows();
    if (m == 0) throw SolveError("solve_dr_quantile: empty sample");
    bool has1 = false, has0 = false;
    for (Eigen::Index i = 0; i < m; ++i) (ctx.t[i] == 1 ? has1 : has0) = true;
    if (!has1 || !has0) throw SolveError("solve_dr_quantile: sample lacks a treatment arm");

    CrossingGrid grid(ctx, level);
    const std::size_t K = grid.unique_y.size();
    const long k = grid.search(0, K - 1);
    DrQuantileResult result;
    result.arm = ctx.arm;
    result.level = level;
    const double inv_m = 1.0 / static_cast<double>(m);
    if (k >= 0) {
        const std::size_t ku = static_cast<std::size_t>(k);
        const double right = grid.unique_y[ku];
        const double left = ku > 0 ? grid.unique_y[ku - 1] : right - 1.0;
        result.bracket = {left, right};
        result.method = "crossing";

        // The estimating function may already cross zero inside the final
        // gap through its continuous part. A monotone bound on the rise of
        // the nondecreasing smooth sum certifies the common case where the
        // crossing happens exactly at the outcome value.
        const double left_anchor =
            ku > 0 ? grid.value(ku - 1) : grid.value_at(left);
        const double left_limit = grid.value(ku) - grid.jump[ku];
        bool interior = false;
        if (left_anchor >= 0.0) {
            // Already nonnegative at the bracket start (only possible for
            // the synthetic k = 0 anchor one unit below the smallest value).
            result.q_hat = left;
            result.residual = left_anchor * inv_m;
            return result;
        }
        if (left_limit >= 0.0) {
            interior = true;
        } else {
            const double bplus_left =
                ku > 0 ? grid.bplus_at(ku - 1)
                       : [&] {
                             double bp, bm;
                             grid.smooth_parts(left, bp, bm);
                             return bp;
                         }();
            const double rise_bound =
                left_anchor + (grid.bplus_at(ku) - bplus_left);
            interior = rise_bound >= -grid.margin;
        }
        if (interior) {
            const double crossing =
                grid.interior_crossing(left, right, left_limit);
            if (!std::isnan(crossing) && crossing < right) {
                result.q_hat = crossing;
                result.residual = grid.value_at(crossing) * inv_m;
                return result;
            }
        }
        result.q_hat = right;
        result.residual = grid.value(ku) * inv_m;
        return result;
    }

    // No outcome value reaches zero; the crossing can only lie past the
    // largest outcome. Bracket one unit beyond the range.
    const double lo = grid.unique_y.front() - 1.0;
    const double hi = grid.unique_y.back() + 1.0;
    const double v_lo = grid.value_at(lo);
    const double v_hi = grid.value_at(hi);
    if (!(v_lo < 0.0 && v_hi >= 0.0)) {
        throw SolveError(
            "solve_dr_quantile: estimating equation has no root on the outcome range");
    }
    const double crossing =
        grid.interior_crossing(grid.unique_y.back(), hi, v_hi);
    if (std::isnan(crossing)) {
        throw SolveError(
            "solve_dr_quantile: estimating equation has no root on the outcome range");
    }
    result.q_hat = crossing;
    result.residual = grid.value_at(crossing) * inv_m;
    result.bracket = {lo, hi};
    result.method = "bisection-fallback";
    return result;
}

DensityEstimate estimate_density(const EstimatingContext& ctx, double q) {
    std::vector<std::pair<double, double>> sample;  // (y, weight), arm rows only
    for (Eigen::Index i = 0; i < ctx.rows(); ++i) {
        if (ctx.t[i] == ctx.arm) sample.emplace_back(ctx.y[i], ctx.weights[i]);
    }
    const std::size_t m = sample.size();
    if (m < 10) throw FitError("estimate_density: arm subsample too small");
    std::sort(sample.begin(), sample.end());

    Eigen::VectorXd values(static_cast<Eigen::Index>(m));
    Eigen::VectorXd weights(static_cast<Eigen::Index>(m));
    for (std::size_t i = 0; i < m; ++i) {
        values[static_cast<Eigen::Index>(i)] = sample[i].first;
        weights[static_cast<Eigen::Index>(i)] = sample[i].second;
    }
    const double total = weights.sum();
    if (!(total > 0.0)) throw FitError("estimate_density: zero total weight");
    weights /= total;  // self-normalized

    const double mean = weights.dot(values);
    const double var = (weights.array() * (values.array() - mean).square()).sum();
    const double sd = std::sqrt(std::max(var, 0.0));
    const double iqr = weighted_quantile_sorted(values, weights, 0.75) -
                       weighted_quantile_sorted(values, weights, 0.25);
    double spread = std::min(sd, iqr / 1.34);
    if (!(spread > 0.0)) spread = std::max(sd, iqr / 1.34);
    if (!(spread > 0.0)) throw FitError("estimate_density: degenerate arm outcomes");

    DensityEstimate est;
    est.arm = ctx.arm;
    est.bandwidth = 0.9 * spread * std::pow(static_cast<double>(m), -0.2);
    double density = 0.0;
    for (Eigen::Index i = 0; i < values.size(); ++i) {
        density += weights[i] * normal_pdf((q - values[i]) / est.bandwidth);
    }
    density /= est.bandwidth;
    if (density < 1e-6) {
        density = 1e-6;
        est.floored = true;
    }
    est.value = density;
    return est;
}

namespace {

std::string condition_report(const Eigen::MatrixXd& mat) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(mat);
    std::ostringstream os;
    os << "singular values " << svd.singularValues().maxCoeff() << " .. "
       << svd.singularValues().minCoeff();
    return os.str();
}

}  // namespace

Eigen::VectorXd influence_psi(const EstimatingContext& ctx, double q_hat,
                              double level, const DensityEstimate& density) {
    const Eigen::Index m = ctx.rows();
    const Eigen::Index ko = ctx.outcome_fit.beta.size() + 1;
    const double inv_sigma = 1.0 / ctx.outcome_fit.sigma;

    Eigen::VectorXd core(m);
    Eigen::VectorXd or_grad_mean = Eigen::VectorXd::Zero(ko);       // E{(1 - w) dG/dtheta}
    Eigen::MatrixXd score_jac_mean = Eigen::MatrixXd::Zero(ko, ko); // E dL/dtheta'
    Eigen::VectorXd h_mean = Eigen::VectorXd::Zero(ctx.ps_fit.alpha.size());  // H_t

    for (Eigen::Index i = 0; i < m; ++i) {
        const Eigen::VectorXd or_row = ctx.or_design.row(i).transpose();
        const double z = (q_hat - ctx.mu[i]) * inv_sigma;
        const double G = normal_cdf(z);
        const double indicator = ctx.y[i] <= q_hat ? 1.0 : 0.0;
        const double w = ctx.weights[i];
        core[i] = w * (indicator - G) + G - level;

        Eigen::VectorXd ggrad(ko);
        const double dens = normal_pdf(z);
        ggrad.head(ko - 1) = (-dens * inv_sigma) * or_row;
        ggrad[ko - 1] = -dens * z * inv_sigma;
        or_grad_mean += (1.0 - w) * ggrad;

        if (ctx.t[i] == ctx.arm) {
            score_jac_mean += normal_linear_score_jacobian(ctx.outcome_fit, ctx.y[i], or_row);
        }

        // d w / d alpha vanishes on clamped rows.
        if (!ctx.clamped[static_cast<std::size_t>(i)] && ctx.t[i] == ctx.arm) {
            const double e = ctx.e[i];
            const double factor = ctx.arm == 1 ? w * (indicator - G) * (1.0 - e)
                                               : -w * (indicator - G) * e;
            h_mean += factor * ctx.ps_design.row(i).transpose();
        }
    }
    const double inv_m = 1.0 / static_cast<double>(m);
    or_grad_mean *= inv_m;
    score_jac_mean *= inv_m;
    h_mean *= inv_m;

    Eigen::FullPivLU<Eigen::MatrixXd> lu_jac(score_jac_mean);
    if (!lu_jac.isInvertible()) {
        throw FitError("influence_psi: singular mean score Jacobian (" +
                       condition_report(score_jac_mean) + ")");
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu_fisher(ctx.ps_fit.fisher);
    if (!lu_fisher.isInvertible()) {
        throw FitError("influence_psi: singular propensity information matrix (" +
                       condition_report(ctx.ps_fit.fisher) + ")");
    }
    const Eigen::VectorXd or_proj = lu_jac.solve(or_grad_mean);      // symmetric Jacobian
    const Eigen::VectorXd ps_proj = lu_fisher.solve(h_mean);

    Eigen::VectorXd psi(m);
    const double scale = -1.0 / density.value;
    for (Eigen::Index i = 0; i < m; ++i) {
        double correction = 0.0;
        if (ctx.t[i] == ctx.arm) {
            const Eigen::VectorXd score = normal_linear_score(
                ctx.outcome_fit, ctx.y[i], ctx.or_design.row(i).transpose());
            correction += or_proj.dot(score);
        }
        const Eigen::VectorXd h = logistic_score(ctx.ps_fit, ctx.t[i],
                                                 ctx.ps_design.row(i).transpose());
        correction += ps_proj.dot(h);
        psi[i] = scale * (core[i] - correction);
    }
    return psi;
}

}  // namespace fqte
