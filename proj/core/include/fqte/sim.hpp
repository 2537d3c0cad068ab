#pragma once

#include "fqte/dataset.hpp"
#include "fqte/drq.hpp"
#include "fqte/estimator.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace fqte {

/// Data-generating process: three Unif(1 - sqrt(3), 1 + sqrt(3)) draws feed
/// one common covariate X1 = W1 and three detailed covariates
/// S1 = exp(W2/2), S2 = log(W3 + 1), S3 = sin(3 W1). Treatment is Bernoulli
/// on a logistic index over (X1, S1, S2, S3); both potential outcomes share
/// the linear mean with normal noise of arm-specific scale. The first n rows
/// keep S (validation sample), the rest drop it.
struct DgpConfig {
    Eigen::Index n = 500;
    Eigen::Index N = 2000;
    std::uint64_t seed = 1;

    double ps_x1 = 0.25, ps_s1 = -0.25, ps_s2 = 0.25, ps_s3 = -0.25;
    double or_x1 = 0.5, or_s1 = -0.5, or_s2 = 0.5, or_s3 = -0.5;
    double sigma1 = 2.0, sigma0 = 1.0;
};

struct LatentTruth {
    Eigen::VectorXd y1, y0;  // potential outcomes for every generated row
};

struct SimulatedData {
    FusedDataset data;
    LatentTruth latent;
};

SimulatedData generate(const DgpConfig& config);

/// Child seed for replication `stream` of master `seed` (counter-based).
std::uint64_t child_seed(std::uint64_t seed, std::uint64_t stream);

/// Marginal potential-outcome quantile difference by plain Monte Carlo with
/// `draws` independent samples; the truth oracle for bias and coverage.
double oracle_qte(const DgpConfig& config, double p, std::size_t draws,
                  std::uint64_t seed);

/// Model-specification scenario. Flags say which working model uses the
/// correct design (1, X1, S1, S2, S3); the misspecified one uses misspec_map.
struct ScenarioSpec {
    std::string name;
    bool or_correct = true;
    bool ps_correct = true;
    FeatureMap misspec_map;

    /// (1, X1, exp(S1/2), S2^2, |S3|).
    static FeatureMap default_misspec_map();
    /// dr11, dr10 (OR misspecified), dr01 (PS misspecified), dr00.
    static ScenarioSpec by_name(const std::string& name);
    static std::vector<ScenarioSpec> all();

    FeatureMap outcome_map() const;
    FeatureMap propensity_map() const;
};

struct ScenarioContexts {
    ContextPair validation;  // full-feature fits on the validation sample
    ContextPair pooled;      // X-only fits on the entire sample
};

ScenarioContexts scenario_contexts(const FusedDataset& ds, const ScenarioSpec& scenario,
                                   bool normalize_weights = true);

struct McOptions {
    bool normalize_weights = true;
    double confidence = 0.95;
    bool center_rho = false;
};

/// Everything recorded from one replication of one scenario.
struct RepOutcome {
    bool ok = false;
    std::string error;
    double delta_v = 0.0, se_v = 0.0;
    double delta_c = 0.0, se_c = 0.0;
    bool cover_v = false, cover_c = false;
    bool var_reduced = false;  // sigma^2 <= sigma_v^2 (+1e-12)
    Eigen::VectorXd c_hat;
};

struct CellResult {
    std::string scenario;
    DgpConfig config;
    QuantileSpec spec;
    double truth = 0.0;
    std::vector<RepOutcome> reps;

    long failures() const;
    long successes() const;
};

/// Runs `replications` independent replications of one scenario; replication
/// r uses child_seed(config.seed, r), so results are identical for any
/// worker count. A replication whose fit fails is recorded and excluded.
CellResult run_cell(const DgpConfig& config, const ScenarioSpec& scenario,
                    const QuantileSpec& spec, long replications, int workers,
                    double truth, const McOptions& options = {});

struct McRow {
    std::string method;
    double bias = 0.0, mse = 0.0, se = 0.0, cr = 0.0;
    long replications = 0;
    long failures = 0;
};

struct McReport {
    double truth = 0.0;
    double p = 0.5;
    std::vector<double> p_cal;
    Eigen::Index n = 0, N = 0;
    std::uint64_t seed = 0;
    long replications = 0;
    std::vector<McRow> rows;
};

/// Aggregates one cell into the initial-estimator row and the fused row
/// ("{scenario}_v", "{scenario}_c{d}"). Throws when more than 1% of
/// replications failed.
std::vector<McRow> summarize_cell(const CellResult& cell);

McReport run_monte_carlo(const DgpConfig& config,
                         const std::vector<ScenarioSpec>& scenarios,
                         const QuantileSpec& spec, long replications, int workers,
                         double truth, const McOptions& options = {});

/// Table with columns Method,BIAS,MSE,SE,CR.
std::string report_csv(const McReport& report);
nlohmann::json report_json(const McReport& report);

}  // namespace fqte
