#include "fqte/csv.hpp"
#include "fqte/errors.hpp"
#include "fqte/estimator.hpp"
#include "fqte/sim.hpp"
#include "fqte/version.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

namespace {

using nlohmann::json;

void write_output(const std::string& path, const std::string& content) {
    if (path.empty() || path == "-") {
        std::cout << content;
        return;
    }
    std::ofstream out(path);
    if (!out) throw fqte::DataError("cannot write output file: " + path);
    out << content;
}

void log_run(const std::string& command, const json& config) {
    json line;
    line["fqte_version"] = fqte::kVersion;
    line["command"] = command;
    line["config"] = config;
    std::cerr << line.dump() << "\n";
}

std::string join_doubles(const std::vector<double>& values) {
    std::string out;
    char buf[40];
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out += ';';
        std::snprintf(buf, sizeof(buf), "%.10g", values[i]);
        out += buf;
    }
    return out;
}

struct EstimateArgs {
    std::string validation, auxiliary;
    std::string y_col = "y", t_col = "t";
    std::vector<std::string> x_cols, s_cols;
    double p = 0.5;
    std::vector<double> p_cal;
    double level = 0.95;
    bool normalize_weights = true;
    bool center_rho = false;
    std::vector<double> delta_grid;
    std::string out = "-";
    std::string format = "json";
};

int run_estimate_command(const EstimateArgs& args) {
    fqte::CsvSchema schema;
    schema.y_col = args.y_col;
    schema.t_col = args.t_col;
    schema.x_cols = args.x_cols;
    schema.s_cols = args.s_cols;

    fqte::EstimateOptions options;
    options.spec.p = args.p;
    options.spec.p_cal = args.p_cal.empty() ? std::vector<double>{args.p} : args.p_cal;
    options.spec.validate();
    options.confidence = args.level;
    options.normalize_weights = args.normalize_weights;
    options.center_rho = args.center_rho;
    const Eigen::Index dims = 2 * options.spec.d();
    for (double scalar : args.delta_grid) {
        options.delta_grid.push_back(Eigen::VectorXd::Constant(dims, scalar));
    }

    json config;
    config["validation"] = args.validation;
    config["auxiliary"] = args.auxiliary;
    config["y_col"] = args.y_col;
    config["t_col"] = args.t_col;
    config["x_cols"] = args.x_cols;
    config["s_cols"] = args.s_cols;
    config["p"] = options.spec.p;
    config["p_cal"] = options.spec.p_cal;
    config["level"] = args.level;
    config["normalize_weights"] = args.normalize_weights;
    config["center_rho"] = args.center_rho;
    config["delta_grid"] = args.delta_grid;
    config["out"] = args.out;
    config["format"] = args.format;
    log_run("estimate", config);

    const fqte::FusedDataset ds =
        fqte::load_fused_dataset(args.validation, args.auxiliary, schema);
    const fqte::EstimateOutput result = fqte::run_estimate(ds, options);
    if (result.clamped_weights > 0) {
        std::cerr << "warning: propensity clamp triggered on "
                  << result.clamped_weights << " rows\n";
    }
    if (result.fqte.variance_floored) {
        std::cerr << "warning: fused variance was negative and floored at zero\n";
    }

    if (args.format == "csv") {
        std::string csv =
            "delta_p,delta_v,se,se_v,ci_low,ci_high,efficiency_gain,regularized,"
            "p,p_cal,c_hat,n,N\n";
        char buf[512];
        std::snprintf(buf, sizeof(buf), "%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%d,",
                      result.fqte.delta_p, result.fqte.delta_v, result.fqte.se,
                      result.se_v(), result.fqte.ci.first, result.fqte.ci.second,
                      result.fqte.efficiency_gain, result.fqte.regularized ? 1 : 0);
        csv += buf;
        std::snprintf(buf, sizeof(buf), "%.10g,", result.p);
        csv += buf;
        csv += join_doubles(result.p_cal) + ",";
        csv += join_doubles(std::vector<double>(
                   result.calib.c_hat.data(),
                   result.calib.c_hat.data() + result.calib.c_hat.size())) +
               ",";
        std::snprintf(buf, sizeof(buf), "%lld,%lld\n",
                      static_cast<long long>(result.n), static_cast<long long>(result.N));
        csv += buf;
        write_output(args.out, csv);
    } else {
        write_output(args.out, fqte::result_json(result).dump(2) + "\n");
    }
    return 0;
}

struct SimulateArgs {
    long n = 500;
    long big_n = 2000;
    std::vector<std::string> scenarios{"dr11", "dr10", "dr01", "dr00"};
    double p = 0.5;
    std::vector<double> p_cal;
    double level = 0.95;
    bool normalize_weights = true;
    std::uint64_t seed = 1;
    long reps = 2000;
    int workers = 1;
    long oracle_draws = 10000000;
    std::string out;
    std::string format = "csv";
};

int run_simulate_command(const SimulateArgs& args) {
    fqte::DgpConfig config;
    config.n = args.n;
    config.N = args.big_n;
    config.seed = args.seed;

    fqte::QuantileSpec spec;
    spec.p = args.p;
    spec.p_cal = args.p_cal.empty() ? std::vector<double>{args.p} : args.p_cal;
    spec.validate();

    std::vector<fqte::ScenarioSpec> scenarios;
    for (const auto& name : args.scenarios) {
        scenarios.push_back(fqte::ScenarioSpec::by_name(name));
    }

    fqte::McOptions options;
    options.normalize_weights = args.normalize_weights;
    options.confidence = args.level;

    json cfg;
    cfg["n"] = args.n;
    cfg["N"] = args.big_n;
    cfg["scenarios"] = args.scenarios;
    cfg["p"] = spec.p;
    cfg["p_cal"] = spec.p_cal;
    cfg["level"] = args.level;
    cfg["normalize_weights"] = args.normalize_weights;
    cfg["seed"] = args.seed;
    cfg["reps"] = args.reps;
    cfg["workers"] = args.workers;
    cfg["oracle_draws"] = args.oracle_draws;
    cfg["out"] = args.out;
    cfg["format"] = args.format;
    log_run("simulate", cfg);

    // Fixed oracle seed keeps the truth constant across configurations.
    const double truth = fqte::oracle_qte(config, spec.p,
                                          static_cast<std::size_t>(args.oracle_draws),
                                          0x5EEDFACEULL);
    const fqte::McReport report = fqte::run_monte_carlo(
        config, scenarios, spec, args.reps, args.workers, truth, options);

    const std::string csv = fqte::report_csv(report);
    const std::string jsn = fqte::report_json(report).dump(2) + "\n";
    if (!args.out.empty() && args.out != "-") {
        write_output(args.out + ".csv", csv);
        write_output(args.out + ".json", jsn);
    } else {
        std::cout << (args.format == "json" ? jsn : csv);
    }
    return 0;
}

const char* error_type(const fqte::Error& err) {
    if (dynamic_cast<const fqte::DataError*>(&err)) return "data";
    if (dynamic_cast<const fqte::FitError*>(&err)) return "fit";
    if (dynamic_cast<const fqte::SolveError*>(&err)) return "solve";
    if (dynamic_cast<const fqte::ConfigError*>(&err)) return "config";
    return "error";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Fused quantile treatment effect estimation"};
    app.require_subcommand(1);

    EstimateArgs est;
    CLI::App* estimate = app.add_subcommand(
        "estimate", "Estimate a quantile treatment effect from two CSV files");
    estimate->add_option("--validation", est.validation,
                         "CSV with full covariates (y, t, x, s)")->required();
    estimate->add_option("--auxiliary", est.auxiliary,
                         "CSV with common covariates only (y, t, x)")->required();
    estimate->add_option("--y-col", est.y_col, "Outcome column name");
    estimate->add_option("--t-col", est.t_col, "Treatment column name");
    estimate->add_option("--x-cols", est.x_cols, "Common covariate columns")
        ->delimiter(',')->required();
    estimate->add_option("--s-cols", est.s_cols, "Detailed covariate columns")
        ->delimiter(',')->required();
    estimate->add_option("--p", est.p, "Target quantile level");
    estimate->add_option("--p-cal", est.p_cal,
                         "Calibration levels (default: the target level)")
        ->delimiter(',');
    estimate->add_option("--level", est.level, "Confidence level");
    estimate->add_option("--normalize-weights", est.normalize_weights,
                         "Rescale arm weights to sum to the sample size");
    estimate->add_flag("--center-rho", est.center_rho,
                       "Center the cross moment before projecting");
    estimate->add_option("--delta-grid", est.delta_grid,
                         "Sensitivity offsets, applied uniformly to all components")
        ->delimiter(',');
    estimate->add_option("--out", est.out, "Output path, '-' for stdout");
    estimate->add_option("--format", est.format, "json or csv")
        ->check(CLI::IsMember({"json", "csv"}));

    SimulateArgs sim;
    CLI::App* simulate = app.add_subcommand(
        "simulate", "Monte Carlo study of the estimator on the built-in process");
    simulate->add_option("--n", sim.n, "Validation sample size");
    simulate->add_option("--N", sim.big_n, "Total sample size");
    simulate->add_option("--scenarios", sim.scenarios,
                         "Subset of dr11,dr10,dr01,dr00")->delimiter(',');
    simulate->add_option("--p", sim.p, "Target quantile level");
    simulate->add_option("--p-cal", sim.p_cal, "Calibration levels")->delimiter(',');
    simulate->add_option("--level", sim.level, "Confidence level");
    simulate->add_option("--normalize-weights", sim.normalize_weights,
                         "Rescale arm weights to sum to the sample size");
    simulate->add_option("--seed", sim.seed, "Master seed");
    simulate->add_option("--reps", sim.reps, "Replications per scenario");
    simulate->add_option("--workers", sim.workers, "Worker threads");
    simulate->add_option("--oracle-draws", sim.oracle_draws,
                         "Monte Carlo draws for the truth constant");
    simulate->add_option("--out", sim.out,
                         "Report path prefix (writes <out>.csv and <out>.json)");
    simulate->add_option("--format", sim.format, "stdout format: json or csv")
        ->check(CLI::IsMember({"json", "csv"}));

    try {
        app.parse(argc, argv);
        if (*estimate) return run_estimate_command(est);
        return run_simulate_command(sim);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const fqte::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const fqte::Error& e) {
        json err;
        err["error"]["type"] = error_type(e);
        err["error"]["message"] = e.what();
        std::cout << err.dump(2) << "\n";
        return 1;
    } catch (const std::exception& e) {
        json err;
        err["error"]["type"] = "internal";
        err["error"]["message"] = e.what();
        std::cout << err.dump(2) << "\n";
        return 1;
    }
}
