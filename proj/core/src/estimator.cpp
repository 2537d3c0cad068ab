#include "fqte/estimator.hpp"

#include "fqte/errors.hpp"

#include <cmath>

namespace fqte {

double EstimateOutput::se_v() const {
    return std::sqrt(cov.sigma_v_sq_hat / static_cast<double>(n));
}

EstimateOutput run_estimate(const FusedDataset& ds, const EstimateOptions& options) {
    options.spec.validate();
    const FeatureMap or_map =
        options.outcome_map ? *options.outcome_map
                            : FeatureMap::linear_xs(ds.px(), ds.ps(), options.intercept);
    const FeatureMap ps_map =
        options.ps_map ? *options.ps_map
                       : FeatureMap::linear_xs(ds.px(), ds.ps(), options.intercept);
    if (or_map.kind != FeatureMap::Kind::FullXS || ps_map.kind != FeatureMap::Kind::FullXS) {
        throw ConfigError("run_estimate: validation maps must use full covariates");
    }

    const ContextPair validation =
        make_contexts(ds, Rows::Validation, or_map, ps_map, options.normalize_weights);
    const FeatureMap pooled_map = FeatureMap::linear_x(ds.px(), options.intercept);
    const ContextPair pooled =
        make_contexts(ds, Rows::All, pooled_map, pooled_map, options.normalize_weights);

    EstimateOutput out;
    out.n = ds.n;
    out.N = ds.N();
    out.p = options.spec.p;
    out.p_cal = options.spec.p_cal;
    out.clamped_weights = validation.arm1.clamp_count + pooled.arm1.clamp_count;

    out.arm1.quantile = solve_dr_quantile(validation.arm1, options.spec.p);
    out.arm0.quantile = solve_dr_quantile(validation.arm0, options.spec.p);
    out.arm1.density = estimate_density(validation.arm1, out.arm1.quantile.q_hat);
    out.arm0.density = estimate_density(validation.arm0, out.arm0.quantile.q_hat);
    out.psi1 = influence_psi(validation.arm1, out.arm1.quantile.q_hat, options.spec.p,
                             out.arm1.density);
    out.psi0 = influence_psi(validation.arm0, out.arm0.quantile.q_hat, options.spec.p,
                             out.arm0.density);

    out.calib = compute_calibration(ds, options.spec, pooled);
    out.cov = estimate_covariances(out.psi1, out.psi0, out.calib, ds.nu(),
                                   options.center_rho);
    const double delta_v = out.arm1.quantile.q_hat - out.arm0.quantile.q_hat;
    out.fqte = fuse_estimate(delta_v, out.calib, out.cov, ds.n, options.confidence);
    if (!options.delta_grid.empty()) {
        out.sensitivity = sensitivity_curve(delta_v, out.calib, out.cov,
                                            options.delta_grid, ds.n, options.confidence);
    }
    return out;
}

nlohmann::json result_json(const EstimateOutput& out) {
    nlohmann::json doc;
    doc["delta_p"] = out.fqte.delta_p;
    doc["delta_v"] = out.fqte.delta_v;
    doc["se"] = out.fqte.se;
    doc["se_v"] = out.se_v();
    doc["ci"] = {out.fqte.ci.first, out.fqte.ci.second};
    doc["efficiency_gain"] = out.fqte.efficiency_gain;
    doc["c_hat"] = std::vector<double>(out.calib.c_hat.data(),
                                       out.calib.c_hat.data() + out.calib.c_hat.size());
    doc["regularized"] = out.fqte.regularized;
    doc["p"] = out.p;
    doc["p_cal"] = out.p_cal;
    doc["n"] = out.n;
    doc["N"] = out.N;
    if (!out.sensitivity.empty()) {
        nlohmann::json curve = nlohmann::json::array();
        for (const auto& point : out.sensitivity) {
            nlohmann::json entry;
            entry["delta"] = std::vector<double>(point.delta.data(),
                                                 point.delta.data() + point.delta.size());
            entry["estimate"] = point.estimate;
            entry["ci"] = {point.ci.first, point.ci.second};
            curve.push_back(entry);
        }
        doc["sensitivity"] = curve;
    }
    return doc;
}

}  // namespace fqte
