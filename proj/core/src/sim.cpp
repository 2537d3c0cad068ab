#include "fqte/sim.hpp"

#include "fqte/errors.hpp"
#include "fqte/mathutil.hpp"
#include "fqte/rng.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <thread>

namespace fqte {

namespace {
constexpr double kSqrt3 = 1.7320508075688772;

inline double logistic(double v) { return 1.0 / (1.0 + std::exp(-v)); }
}  // namespace

std::uint64_t child_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t sm = seed;
    return splitmix64(sm) ^ (0x9E3779B97F4A7C15ULL * (stream + 1));
}

SimulatedData generate(const DgpConfig& config) {
    if (config.n < 1 || config.N <= config.n) {
        throw ConfigError("generate: require 1 <= n < N");
    }
    const Eigen::Index N = config.N;
    Rng rng(config.seed);

    Eigen::VectorXd y(N), y1(N), y0(N);
    Eigen::VectorXi t(N);
    Eigen::MatrixXd x(N, 1);
    Eigen::MatrixXd s(config.n, 3);

    const double lo = 1.0 - kSqrt3;
    const double hi = 1.0 + kSqrt3;
    for (Eigen::Index i = 0; i < N; ++i) {
        const double w1 = rng.uniform(lo, hi);
        const double w2 = rng.uniform(lo, hi);
        const double w3 = rng.uniform(lo, hi);
        const double x1 = w1;
        const double s1 = std::exp(w2 / 2.0);
        const double s2 = std::log(w3 + 1.0);
        const double s3 = std::sin(3.0 * w1);
        const double ps_index = config.ps_x1 * x1 + config.ps_s1 * s1 +
                                config.ps_s2 * s2 + config.ps_s3 * s3;
        const int treat = rng.bernoulli(logistic(ps_index));
        const double mean = config.or_x1 * x1 + config.or_s1 * s1 +
                            config.or_s2 * s2 + config.or_s3 * s3;
        const double eps1 = config.sigma1 * rng.normal();
        const double eps0 = config.sigma0 * rng.normal();
        y1[i] = mean + eps1;
        y0[i] = mean + eps0;
        y[i] = treat == 1 ? y1[i] : y0[i];
        t[i] = treat;
        x(i, 0) = x1;
        if (i < config.n) {
            s(i, 0) = s1;
            s(i, 1) = s2;
            s(i, 2) = s3;
        }
    }

    SimulatedData out{FusedDataset::create(std::move(y), std::move(t), std::move(x),
                                           std::move(s), config.n),
                      LatentTruth{std::move(y1), std::move(y0)}};
    return out;
}

double oracle_qte(const DgpConfig& config, double p, std::size_t draws,
                  std::uint64_t seed) {
    if (!(p > 0.0 && p < 1.0)) throw ConfigError("oracle_qte: level out of range");
    if (draws < 100) throw ConfigError("oracle_qte: too few draws");
    Rng rng(seed);
    std::vector<double> y1(draws), y0(draws);
    const double lo = 1.0 - kSqrt3;
    const double hi = 1.0 + kSqrt3;
    for (std::size_t i = 0; i < draws; ++i) {
        const double w1 = rng.uniform(lo, hi);
        const double w2 = rng.uniform(lo, hi);
        const double w3 = rng.uniform(lo, hi);
        const double mean = config.or_x1 * w1 + config.or_s1 * std::exp(w2 / 2.0) +
                            config.or_s2 * std::log(w3 + 1.0) +
                            config.or_s3 * std::sin(3.0 * w1);
        y1[i] = mean + config.sigma1 * rng.normal();
        y0[i] = mean + config.sigma0 * rng.normal();
    }
    // Generalized-inverse sample quantile: order statistic ceil(p * draws).
    const std::size_t k = static_cast<std::size_t>(
        std::ceil(p * static_cast<double>(draws))) - 1;
    std::nth_element(y1.begin(), y1.begin() + static_cast<std::ptrdiff_t>(k), y1.end());
    std::nth_element(y0.begin(), y0.begin() + static_cast<std::ptrdiff_t>(k), y0.end());
    return y1[k] - y0[k];
}

FeatureMap ScenarioSpec::default_misspec_map() {
    FeatureMap map;
    map.kind = FeatureMap::Kind::FullXS;
    map.name = "misspec_xs";
    map.dim = 5;
    map.fn = [](const Eigen::VectorXd& x, const Eigen::VectorXd& s) {
        Eigen::VectorXd d(5);
        d << 1.0, x[0], std::exp(s[0] / 2.0), s[1] * s[1], std::abs(s[2]);
        return d;
    };
    return map;
}

ScenarioSpec ScenarioSpec::by_name(const std::string& name) {
    ScenarioSpec spec;
    spec.name = name;
    spec.misspec_map = default_misspec_map();
    if (name == "dr11") {
        spec.or_correct = true;
        spec.ps_correct = true;
    } else if (name == "dr10") {
        spec.or_correct = false;
        spec.ps_correct = true;
    } else if (name == "dr01") {
        spec.or_correct = true;
        spec.ps_correct = false;
    } else if (name == "dr00") {
        spec.or_correct = false;
        spec.ps_correct = false;
    } else {
        throw ConfigError("unknown scenario: " + name);
    }
    return spec;
}

std::vector<ScenarioSpec> ScenarioSpec::all() {
    return {by_name("dr11"), by_name("dr10"), by_name("dr01"), by_name("dr00")};
}

FeatureMap ScenarioSpec::outcome_map() const {
    return or_correct ? FeatureMap::linear_xs(1, 3) : misspec_map;
}

FeatureMap ScenarioSpec::propensity_map() const {
    return ps_correct ? FeatureMap::linear_xs(1, 3) : misspec_map;
}

ScenarioContexts scenario_contexts(const FusedDataset& ds, const ScenarioSpec& scenario,
                                   bool normalize_weights) {
    ScenarioContexts contexts{
        make_contexts(ds, Rows::Validation, scenario.outcome_map(),
                      scenario.propensity_map(), normalize_weights),
        make_contexts(ds, Rows::All, FeatureMap::linear_x(ds.px()),
                      FeatureMap::linear_x(ds.px()), normalize_weights)};
    return contexts;
}

long CellResult::failures() const {
    long count = 0;
    for (const auto& rep : reps) {
        if (!rep.ok) ++count;
    }
    return count;
}

long CellResult::successes() const {
    return static_cast<long>(reps.size()) - failures();
}

namespace {

RepOutcome run_one_replication(const DgpConfig& base, const ScenarioSpec& scenario,
                               const QuantileSpec& spec, long rep, double truth,
                               const McOptions& options) {
    RepOutcome outcome;
    try {
        DgpConfig config = base;
        config.seed = child_seed(base.seed, static_cast<std::uint64_t>(rep));
        const SimulatedData sim = generate(config);

        EstimateOptions opt;
        opt.spec = spec;
        opt.confidence = options.confidence;
        opt.normalize_weights = options.normalize_weights;
        opt.center_rho = options.center_rho;
        opt.outcome_map = scenario.outcome_map();
        opt.ps_map = scenario.propensity_map();
        const EstimateOutput est = run_estimate(sim.data, opt);

        outcome.ok = true;
        outcome.delta_v = est.fqte.delta_v;
        outcome.se_v = est.se_v();
        outcome.delta_c = est.fqte.delta_p;
        outcome.se_c = est.fqte.se;
        const double z = normal_quantile(0.5 + options.confidence / 2.0);
        outcome.cover_v = std::abs(outcome.delta_v - truth) <= z * outcome.se_v;
        outcome.cover_c = est.fqte.ci.first <= truth && truth <= est.fqte.ci.second;
        outcome.var_reduced = est.fqte.sigma_sq <= est.cov.sigma_v_sq_hat + 1e-12;
        outcome.c_hat = est.calib.c_hat;
    } catch (const std::exception& err) {
        outcome.ok = false;
        outcome.error = err.what();
    }
    return outcome;
}

}  // namespace

CellResult run_cell(const DgpConfig& config, const ScenarioSpec& scenario,
                    const QuantileSpec& spec, long replications, int workers,
                    double truth, const McOptions& options) {
    if (replications < 1) throw ConfigError("run_cell: replications must be >= 1");
    spec.validate();

    CellResult cell;
    cell.scenario = scenario.name;
    cell.config = config;
    cell.spec = spec;
    cell.truth = truth;
    cell.reps.resize(static_cast<std::size_t>(replications));

    const int thread_count = std::max(
        1, std::min<int>(workers, static_cast<int>(replications)));
    std::atomic<long> next{0};
    auto work = [&]() {
        for (;;) {
            const long r = next.fetch_add(1);
            if (r >= replications) break;
            cell.reps[static_cast<std::size_t>(r)] =
                run_one_replication(config, scenario, spec, r, truth, options);
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(thread_count - 1));
    for (int i = 0; i + 1 < thread_count; ++i) pool.emplace_back(work);
    work();
    for (auto& th : pool) th.join();
    return cell;
}

std::vector<McRow> summarize_cell(const CellResult& cell) {
    const long total = static_cast<long>(cell.reps.size());
    const long failed = cell.failures();
    if (failed * 100 > total) {
        throw Error("monte carlo: more than 1% of replications failed (" +
                    std::to_string(failed) + " of " + std::to_string(total) + ")");
    }
    const long ok = total - failed;

    double err_v = 0.0, err_c = 0.0, sq_v = 0.0, sq_c = 0.0;
    double se_v = 0.0, se_c = 0.0, cov_v = 0.0, cov_c = 0.0;
    for (const auto& rep : cell.reps) {
        if (!rep.ok) continue;
        const double ev = rep.delta_v - cell.truth;
        const double ec = rep.delta_c - cell.truth;
        err_v += ev;
        err_c += ec;
        sq_v += ev * ev;
        sq_c += ec * ec;
        se_v += rep.se_v;
        se_c += rep.se_c;
        cov_v += rep.cover_v ? 1.0 : 0.0;
        cov_c += rep.cover_c ? 1.0 : 0.0;
    }
    const double inv = 1.0 / static_cast<double>(ok);

    McRow row_v;
    row_v.method = cell.scenario + "_v";
    row_v.bias = std::abs(err_v * inv);
    row_v.mse = sq_v * inv;
    row_v.se = se_v * inv;
    row_v.cr = cov_v * inv;
    row_v.replications = ok;
    row_v.failures = failed;

    McRow row_c;
    row_c.method = cell.scenario + "_c" + std::to_string(cell.spec.d());
    row_c.bias = std::abs(err_c * inv);
    row_c.mse = sq_c * inv;
    row_c.se = se_c * inv;
    row_c.cr = cov_c * inv;
    row_c.replications = ok;
    row_c.failures = failed;

    return {row_v, row_c};
}

McReport run_monte_carlo(const DgpConfig& config,
                         const std::vector<ScenarioSpec>& scenarios,
                         const QuantileSpec& spec, long replications, int workers,
                         double truth, const McOptions& options) {
    McReport report;
    report.truth = truth;
    report.p = spec.p;
    report.p_cal = spec.p_cal;
    report.n = config.n;
    report.N = config.N;
    report.seed = config.seed;
    report.replications = replications;
    for (const auto& scenario : scenarios) {
        const CellResult cell =
            run_cell(config, scenario, spec, replications, workers, truth, options);
        for (auto& row : summarize_cell(cell)) report.rows.push_back(std::move(row));
    }
    return report;
}

std::string report_csv(const McReport& report) {
    std::string out = "Method,BIAS,MSE,SE,CR\n";
    char buf[160];
    for (const auto& row : report.rows) {
        std::snprintf(buf, sizeof(buf), "%s,%.6f,%.6f,%.6f,%.6f\n", row.method.c_str(),
                      row.bias, row.mse, row.se, row.cr);
        out += buf;
    }
    return out;
}

nlohmann::json report_json(const McReport& report) {
    nlohmann::json doc;
    doc["truth"] = report.truth;
    doc["p"] = report.p;
    doc["p_cal"] = report.p_cal;
    doc["n"] = report.n;
    doc["N"] = report.N;
    doc["seed"] = report.seed;
    doc["replications"] = report.replications;
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : report.rows) {
        nlohmann::json entry;
        entry["method"] = row.method;
        entry["bias"] = row.bias;
        entry["mse"] = row.mse;
        entry["se"] = row.se;
        entry["cr"] = row.cr;
        entry["replications"] = row.replications;
        entry["failures"] = row.failures;
        rows.push_back(entry);
    }
    doc["rows"] = rows;
    return doc;
}

}  // namespace fqte
