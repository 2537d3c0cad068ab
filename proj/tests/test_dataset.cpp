#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fqte/csv.hpp"
#include "fqte/dataset.hpp"
#include "fqte/errors.hpp"
#include "fqte/sim.hpp"

#include "test_support.hpp"

#include <fstream>
#include <string>

using namespace fqte;
using testsupport::TempDir;

namespace {

CsvSchema sim_schema() {
    CsvSchema schema;
    schema.x_cols = {"x1"};
    schema.s_cols = {"s1", "s2", "s3"};
    return schema;
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    out << content;
}

}  // namespace

TEST_CASE("create enforces structural invariants") {
    Eigen::VectorXd y(4);
    y << 1.0, 2.0, 3.0, 4.0;
    Eigen::VectorXi t(4);
    t << 1, 0, 1, 0;
    Eigen::MatrixXd x = Eigen::MatrixXd::Ones(4, 1);
    Eigen::MatrixXd s = Eigen::MatrixXd::Ones(2, 1);

    const FusedDataset ds = FusedDataset::create(y, t, x, s, 2);
    CHECK(ds.n == 2);
    CHECK(ds.N() == 4);
    CHECK(ds.nu() == doctest::Approx(0.5));

    CHECK_THROWS_AS(FusedDataset::create(y, t, x, s, 0), DataError);
    CHECK_THROWS_AS(FusedDataset::create(y, t, x, Eigen::MatrixXd::Ones(4, 1), 4),
                    DataError);

    Eigen::VectorXi bad_t = t;
    bad_t[1] = 2;
    CHECK_THROWS_WITH_AS(FusedDataset::create(y, bad_t, x, s, 2),
                         doctest::Contains("non-binary"), DataError);

    Eigen::VectorXd bad_y = y;
    bad_y[0] = std::nan("");
    CHECK_THROWS_AS(FusedDataset::create(bad_y, t, x, s, 2), DataError);

    Eigen::VectorXi one_arm = t;
    one_arm[1] = 1;  // validation rows all treated
    CHECK_THROWS_WITH_AS(FusedDataset::create(y, one_arm, x, s, 2),
                         doctest::Contains("empty treatment arm"), DataError);
}

TEST_CASE("quantile spec validation") {
    CHECK_NOTHROW(QuantileSpec::single(0.5).validate());
    QuantileSpec bad = QuantileSpec::single(0.5);
    bad.p_cal = {1.5};
    CHECK_THROWS_WITH_AS(bad.validate(), doctest::Contains("out of range"), ConfigError);
    bad.p_cal = {0.5, 0.25};
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad.p = 1.2;
    bad.p_cal = {0.5};
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("csv loading counts and schema mapping") {
    TempDir dir("load");
    std::string val = "extra,y,t,x1,s1,s2,s3\n";
    for (int i = 0; i < 500; ++i) {
        val += "9," + std::to_string(0.1 * i) + "," + std::to_string(i % 2) +
               ",1.5,0.3,0.2,0.1\n";
    }
    std::string aux = "y,t,x1\n";
    for (int i = 0; i < 1500; ++i) {
        aux += std::to_string(0.2 * i) + "," + std::to_string((i + 1) % 2) + ",2.5\n";
    }
    write_file(dir.file("v.csv"), val);
    write_file(dir.file("a.csv"), aux);

    const FusedDataset ds = load_fused_dataset(dir.file("v.csv"), dir.file("a.csv"),
                                               sim_schema());
    CHECK(ds.n == 500);
    CHECK(ds.N() == 2000);
    CHECK(ds.nu() == doctest::Approx(0.25));
    CHECK(ds.y[0] == 0.0);
    CHECK(ds.y[500] == 0.0);
    CHECK(ds.x(0, 0) == 1.5);
    CHECK(ds.x(500, 0) == 2.5);
    CHECK(ds.s(0, 2) == 0.1);

    // Loading is deterministic.
    const FusedDataset again = load_fused_dataset(dir.file("v.csv"), dir.file("a.csv"),
                                                  sim_schema());
    CHECK(again.y == ds.y);
    CHECK(again.x == ds.x);
}

TEST_CASE("csv error reporting with row and column location") {
    TempDir dir("errors");
    const std::string good_aux = "y,t,x1\n1.0,1,0.5\n2.0,0,0.25\n";

    write_file(dir.file("a.csv"), good_aux);
    write_file(dir.file("v.csv"),
               "y,t,x1,s1,s2,s3\n1.0,1,0.5,1,1,1\n2.0,2,0.5,1,1,1\n3.0,0,0.5,1,1,1\n");
    CHECK_THROWS_WITH_AS(
        load_fused_dataset(dir.file("v.csv"), dir.file("a.csv"), sim_schema()),
        doctest::Contains("non-binary treatment"), DataError);

    write_file(dir.file("v2.csv"), "y,t,x1,s1,s2\n1.0,1,0.5,1,1\n");
    CHECK_THROWS_WITH_AS(
        load_fused_dataset(dir.file("v2.csv"), dir.file("a.csv"), sim_schema()),
        doctest::Contains("missing column 's3'"), DataError);

    write_file(dir.file("v3.csv"),
               "y,t,x1,s1,s2,s3\n1.0,1,0.5,1,1,1\nnan,0,0.5,1,1,1\n");
    CHECK_THROWS_WITH_AS(
        load_fused_dataset(dir.file("v3.csv"), dir.file("a.csv"), sim_schema()),
        doctest::Contains("row 2"), DataError);

    // s columns must be absent from the auxiliary file.
    write_file(dir.file("v4.csv"),
               "y,t,x1,s1,s2,s3\n1.0,1,0.5,1,1,1\n2.0,0,0.5,1,1,1\n");
    write_file(dir.file("a2.csv"), "y,t,x1,s1\n1.0,1,0.5,3\n");
    CHECK_THROWS_WITH_AS(
        load_fused_dataset(dir.file("v4.csv"), dir.file("a2.csv"), sim_schema()),
        doctest::Contains("must not contain"), DataError);

    // Empty validation arm.
    write_file(dir.file("v5.csv"),
               "y,t,x1,s1,s2,s3\n1.0,1,0.5,1,1,1\n2.0,1,0.5,1,1,1\n");
    CHECK_THROWS_WITH_AS(
        load_fused_dataset(dir.file("v5.csv"), dir.file("a.csv"), sim_schema()),
        doctest::Contains("empty treatment arm"), DataError);
}

TEST_CASE("quoted fields parse") {
    TempDir dir("quoted");
    write_file(dir.file("v.csv"),
               "y,t,x1,s1,s2,s3\n\"1.5\",1,\"0.25\",1,1,1\n2.0,0,0.5,1,1,1\n");
    write_file(dir.file("a.csv"), "y,t,x1\n1.0,1,0.5\n2.0,0,0.25\n");
    const FusedDataset ds = load_fused_dataset(dir.file("v.csv"), dir.file("a.csv"),
                                               sim_schema());
    CHECK(ds.y[0] == 1.5);
    CHECK(ds.x(0, 0) == 0.25);
}

TEST_CASE("simulated datasets round-trip through csv exactly") {
    const SimulatedData sim = testsupport::dgp(120, 480, 42);
    TempDir dir("roundtrip");
    write_fused_dataset(sim.data, dir.file("v.csv"), dir.file("a.csv"), sim_schema());
    const FusedDataset loaded = load_fused_dataset(dir.file("v.csv"), dir.file("a.csv"),
                                                   sim_schema());
    CHECK(loaded.n == sim.data.n);
    CHECK(loaded.N() == sim.data.N());
    CHECK(loaded.y == sim.data.y);
    CHECK(loaded.t == sim.data.t);
    CHECK(loaded.x == sim.data.x);
    CHECK(loaded.s == sim.data.s);
}
