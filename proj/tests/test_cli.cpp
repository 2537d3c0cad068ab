#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fqte/csv.hpp"
#include "fqte/sim.hpp"

#include "test_support.hpp"

#include <nlohmann/json.hpp>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

using nlohmann::json;
using testsupport::TempDir;

namespace {

std::string cli_path() {
    const char* env = std::getenv("FQTE_CLI");
    REQUIRE_MESSAGE(env != nullptr, "FQTE_CLI must point at the fqte binary");
    return env;
}

struct RunResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

RunResult run_cli(const std::string& args, const TempDir& dir, const std::string& tag) {
    const std::string out_file = dir.file("stdout_" + tag);
    const std::string err_file = dir.file("stderr_" + tag);
    const std::string cmd =
        cli_path() + " " + args + " > " + out_file + " 2> " + err_file;
    const int status = std::system(cmd.c_str());
    RunResult result;
    result.exit_code = WEXITSTATUS(status);
    result.out = slurp(out_file);
    result.err = slurp(err_file);
    return result;
}

void write_simulated_csvs(const TempDir& dir, Eigen::Index n, Eigen::Index N,
                          std::uint64_t seed) {
    const fqte::SimulatedData sim = testsupport::dgp(n, N, seed);
    fqte::CsvSchema schema;
    schema.x_cols = {"x1"};
    schema.s_cols = {"s1", "s2", "s3"};
    fqte::write_fused_dataset(sim.data, dir.file("v.csv"), dir.file("a.csv"), schema);
}

}  // namespace

TEST_CASE("estimate: end-to-end on simulated csv data") {
    TempDir dir("cli_estimate");
    write_simulated_csvs(dir, 500, 2000, 7001);
    const std::string args = "estimate --validation " + dir.file("v.csv") +
                             " --auxiliary " + dir.file("a.csv") +
                             " --x-cols x1 --s-cols s1,s2,s3 --p 0.5";
    const RunResult r = run_cli(args, dir, "a");
    REQUIRE(r.exit_code == 0);
    const json doc = json::parse(r.out);
    CHECK(doc["n"] == 500);
    CHECK(doc["N"] == 2000);
    CHECK(doc["efficiency_gain"].get<double>() > 0.0);
    CHECK(doc["se"].get<double>() < doc["se_v"].get<double>());
    CHECK(doc["c_hat"].size() == 2);
    // The run log lands on stderr with the resolved config.
    CHECK(r.err.find("fqte_version") != std::string::npos);
    CHECK(r.err.find("\"command\":\"estimate\"") != std::string::npos);

    // Identical invocations produce byte-identical output.
    const RunResult again = run_cli(args, dir, "b");
    CHECK(again.exit_code == 0);
    CHECK(again.out == r.out);

    // Sensitivity grid shows up when requested.
    const RunResult sens = run_cli(args + " --delta-grid 0,0.05", dir, "c");
    REQUIRE(sens.exit_code == 0);
    const json sens_doc = json::parse(sens.out);
    REQUIRE(sens_doc.contains("sensitivity"));
    CHECK(sens_doc["sensitivity"].size() == 2);
    CHECK(sens_doc["sensitivity"][0]["estimate"].get<double>() ==
          doctest::Approx(sens_doc["delta_p"].get<double>()).epsilon(1e-12));

    // CSV format emits a header plus one row.
    const RunResult csv = run_cli(args + " --format csv", dir, "d");
    REQUIRE(csv.exit_code == 0);
    CHECK(csv.out.rfind("delta_p,delta_v,se,se_v,", 0) == 0);
}

TEST_CASE("estimate: config and data errors map to exit codes") {
    TempDir dir("cli_errors");
    write_simulated_csvs(dir, 80, 320, 7002);
    const std::string base = "estimate --validation " + dir.file("v.csv") +
                             " --auxiliary " + dir.file("a.csv") +
                             " --x-cols x1 --s-cols s1,s2,s3";

    // Quantile level out of range: configuration error, exit 2.
    const RunResult bad_level = run_cli(base + " --p-cal 1.5", dir, "a");
    CHECK(bad_level.exit_code == 2);
    CHECK(bad_level.err.find("out of range") != std::string::npos);

    // Unknown flag: exit 2.
    CHECK(run_cli(base + " --bogus-flag 1", dir, "b").exit_code == 2);

    // Missing file: module error with machine-readable JSON, exit 1.
    const RunResult missing = run_cli(
        "estimate --validation /nonexistent.csv --auxiliary " + dir.file("a.csv") +
            " --x-cols x1 --s-cols s1,s2,s3",
        dir, "c");
    CHECK(missing.exit_code == 1);
    const json err = json::parse(missing.out);
    CHECK(err["error"]["type"] == "data");
    CHECK(err["error"].contains("message"));
}

TEST_CASE("simulate: smoke run emits every scenario row") {
    TempDir dir("cli_sim");
    const std::string args =
        "simulate --n 100 --N 400 --reps 10 --workers 2 --seed 31 "
        "--oracle-draws 200000 --out " + dir.file("report");
    const RunResult r = run_cli(args, dir, "a");
    REQUIRE(r.exit_code == 0);
    const std::string csv = slurp(dir.file("report.csv"));
    CHECK(csv.rfind("Method,BIAS,MSE,SE,CR\n", 0) == 0);
    for (const char* method : {"dr11_v", "dr11_c1", "dr10_v", "dr10_c1", "dr01_v",
                               "dr01_c1", "dr00_v", "dr00_c1"}) {
        CHECK(csv.find(method) != std::string::npos);
    }
    const json doc = json::parse(slurp(dir.file("report.json")));
    CHECK(doc["rows"].size() == 8);
    CHECK(doc["replications"] == 10);
}

TEST_CASE("simulate: reports are identical across worker counts") {
    TempDir dir("cli_workers");
    const std::string common =
        "simulate --n 100 --N 400 --reps 12 --seed 77 --scenarios dr11 "
        "--oracle-draws 200000 --out ";
    const RunResult one =
        run_cli(common + dir.file("w1") + " --workers 1", dir, "a");
    const RunResult four =
        run_cli(common + dir.file("w4") + " --workers 4", dir, "b");
    REQUIRE(one.exit_code == 0);
    REQUIRE(four.exit_code == 0);
    CHECK(slurp(dir.file("w1.csv")) == slurp(dir.file("w4.csv")));
    CHECK(slurp(dir.file("w1.json")) == slurp(dir.file("w4.json")));
}
