#include "fqte/drq.hpp"
#include "fqte/estimator.hpp"
#include "fqte/sim.hpp"

#include <benchmark/benchmark.h>

namespace {

fqte::SimulatedData make_data(Eigen::Index n, Eigen::Index N) {
    fqte::DgpConfig config;
    config.n = n;
    config.N = N;
    config.seed = 17;
    return fqte::generate(config);
}

void BM_FitLogistic(benchmark::State& state) {
    const auto sim = make_data(500, 2000);
    const auto design = fqte::design_matrix(sim.data, fqte::FeatureMap::linear_xs(1, 3),
                                            fqte::Rows::Validation);
    const Eigen::VectorXi labels = sim.data.t.head(sim.data.n);
    for (auto _ : state) {
        benchmark::DoNotOptimize(fqte::fit_logistic(design, labels));
    }
}
BENCHMARK(BM_FitLogistic);

void BM_SolveQuantile(benchmark::State& state) {
    const auto sim = make_data(state.range(0) / 4, state.range(0));
    const auto pooled = fqte::make_contexts(sim.data, fqte::Rows::All,
                                            fqte::FeatureMap::linear_x(1),
                                            fqte::FeatureMap::linear_x(1), true);
    for (auto _ : state) {
        benchmark::DoNotOptimize(fqte::solve_dr_quantile(pooled.arm1, 0.5));
    }
}
BENCHMARK(BM_SolveQuantile)->Arg(500)->Arg(2000)->Arg(5000);

void BM_FullEstimate(benchmark::State& state) {
    const auto sim = make_data(500, 2000);
    fqte::EstimateOptions options;
    options.spec = fqte::QuantileSpec::single(0.5);
    for (auto _ : state) {
        benchmark::DoNotOptimize(fqte::run_estimate(sim.data, options));
    }
}
BENCHMARK(BM_FullEstimate);

}  // namespace

BENCHMARK_MAIN();
