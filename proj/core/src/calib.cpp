#include "fqte/calib.hpp"

#include "fqte/errors.hpp"
#include "fqte/mathutil.hpp"

#include <cmath>

namespace fqte {

CalibrationResult calibration_from_rows(const ContextPair& pooled,
                                        const QuantileSpec& spec,
                                        Eigen::Index n_validation) {
    spec.validate();
    if (pooled.arm1.outcome_map.kind != FeatureMap::Kind::XOnly) {
        throw ConfigError("calibration requires X-only pooled contexts");
    }
    const Eigen::Index N = pooled.arm1.rows();
    if (n_validation < 1 || n_validation > N) {
        throw ConfigError("calibration: validation row count out of range");
    }
    const Eigen::Index d = spec.d();

    CalibrationResult result;
    result.c_hat.resize(2 * d);
    result.phi_entire.resize(N, 2 * d);
    result.conf_quantiles.resize(2 * d);
    result.conf_solves.reserve(static_cast<std::size_t>(2 * d));

    for (int block = 0; block < 2; ++block) {
        const int arm = block == 0 ? 1 : 0;
        const EstimatingContext& ctx = pooled.arm(arm);
        const double inv_sigma = 1.0 / ctx.outcome_fit.sigma;
        for (Eigen::Index k = 0; k < d; ++k) {
            const double level = spec.p_cal[static_cast<std::size_t>(k)];
            const DrQuantileResult solve = solve_dr_quantile(ctx, level);
            const Eigen::Index col = block * d + k;
            result.conf_quantiles[col] = solve.q_hat;
            for (Eigen::Index i = 0; i < N; ++i) {
                const double G = normal_cdf((solve.q_hat - ctx.mu[i]) * inv_sigma);
                const double indicator = ctx.y[i] <= solve.q_hat ? 1.0 : 0.0;
                result.phi_entire(i, col) =
                    ctx.weights[i] * (indicator - G) + G - level;
            }
            result.c_hat[col] =
                kahan_sum(result.phi_entire.col(col).head(n_validation)) /
                static_cast<double>(n_validation);
            result.conf_solves.push_back(solve);
        }
    }
    result.phi_validation = result.phi_entire.topRows(n_validation);
    return result;
}

CalibrationResult compute_calibration(const FusedDataset& ds, const QuantileSpec& spec,
                                      const ContextPair& pooled) {
    if (pooled.arm1.rows() != ds.N()) {
        throw ConfigError("compute_calibration: contexts were not built on the pooled sample");
    }
    return calibration_from_rows(pooled, spec, ds.n);
}

}  // namespace fqte
