#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fqte/errors.hpp"
#include "fqte/mathutil.hpp"
#include "fqte/models.hpp"
#include "fqte/rng.hpp"
#include "fqte/sim.hpp"

#include "test_support.hpp"

using namespace fqte;

namespace {

// Fixed 20-row data for the logistic oracle comparison.
void fixed_logistic_data(Eigen::MatrixXd& design, Eigen::VectorXi& labels) {
    const double xs[20] = {-1.9, -1.5, -1.2, -0.9, -0.7, -0.5, -0.3, -0.1, 0.0, 0.2,
                           0.3,  0.5,  0.7,  0.8,  1.0,  1.2,  1.4,  1.6, 1.8, 2.1};
    const int ys[20] = {0, 0, 0, 1, 0, 0, 1, 0, 1, 0, 1, 1, 0, 1, 1, 1, 0, 1, 1, 1};
    design.resize(20, 2);
    labels.resize(20);
    for (int i = 0; i < 20; ++i) {
        design(i, 0) = 1.0;
        design(i, 1) = xs[i];
        labels[i] = ys[i];
    }
}

}  // namespace

TEST_CASE("feature maps") {
    const FeatureMap full = FeatureMap::linear_xs(2, 3);
    Eigen::VectorXd x(2), s(3);
    x << 1.5, -0.5;
    s << 0.1, 0.2, 0.3;
    const Eigen::VectorXd d = full(x, s);
    REQUIRE(d.size() == 6);
    CHECK(d[0] == 1.0);
    CHECK(d[1] == 1.5);
    CHECK(d[5] == 0.3);

    const FeatureMap marginal = FeatureMap::linear_x(2);
    const Eigen::VectorXd dm = marginal(x);
    REQUIRE(dm.size() == 3);
    CHECK(dm[2] == -0.5);

    const SimulatedData sim = testsupport::dgp(50, 200, 7);
    CHECK_THROWS_AS(design_matrix(sim.data, full, Rows::All), ConfigError);
    const Eigen::MatrixXd dv = design_matrix(sim.data, FeatureMap::linear_xs(1, 3),
                                             Rows::Validation);
    CHECK(dv.rows() == 50);
    CHECK(dv.cols() == 5);
    const Eigen::MatrixXd da = design_matrix(sim.data, FeatureMap::linear_x(1), Rows::All);
    CHECK(da.rows() == 200);
}

TEST_CASE("logistic: balanced labels with intercept only give alpha zero") {
    Eigen::MatrixXd design = Eigen::MatrixXd::Ones(20, 1);
    Eigen::VectorXi labels(20);
    for (int i = 0; i < 20; ++i) labels[i] = i < 10 ? 1 : 0;
    const LogisticFit fit = fit_logistic(design, labels);
    CHECK(fit.converged);
    CHECK(std::abs(fit.alpha[0]) < 1e-9);
}

TEST_CASE("logistic: fixed dataset matches the grid-search oracle") {
    Eigen::MatrixXd design;
    Eigen::VectorXi labels;
    fixed_logistic_data(design, labels);
    const LogisticFit fit = fit_logistic(design, labels);
    const Eigen::VectorXd oracle = testsupport::grid_search_logistic(design, labels);
    for (Eigen::Index j = 0; j < 2; ++j) {
        CHECK(fit.alpha[j] == doctest::Approx(oracle[j]).epsilon(1e-6));
    }

    // Refits reproduce identical parameters.
    const LogisticFit refit = fit_logistic(design, labels);
    CHECK(refit.alpha == fit.alpha);
}

TEST_CASE("logistic: recovers the simulation propensity coefficients") {
    const SimulatedData sim = testsupport::dgp(100000, 100001, 99);
    const Eigen::MatrixXd design =
        design_matrix(sim.data, FeatureMap::linear_xs(1, 3), Rows::Validation);
    const Eigen::VectorXi labels = sim.data.t.head(sim.data.n);
    const LogisticFit fit = fit_logistic(design, labels);
    CHECK(fit.converged);
    const double expected[5] = {0.0, 0.25, -0.25, 0.25, -0.25};
    for (int j = 0; j < 5; ++j) {
        CHECK(std::abs(fit.alpha[j] - expected[j]) < 0.05);
    }
}

TEST_CASE("logistic: score identities and error paths") {
    Eigen::MatrixXd design;
    Eigen::VectorXi labels;
    fixed_logistic_data(design, labels);
    const LogisticFit fit = fit_logistic(design, labels);
    const Eigen::VectorXd score_mean = fit.scores.colwise().mean();
    CHECK(score_mean.lpNorm<Eigen::Infinity>() < 1e-6);
    CHECK((fit.fisher - fit.fisher.transpose()).norm() < 1e-12);

    Eigen::VectorXi constant = Eigen::VectorXi::Ones(20);
    CHECK_THROWS_AS(fit_logistic(design, constant), FitError);

    // Perfectly separated labels diverge. A small-scale covariate forces
    // large Newton steps, so the coefficient norm crosses the detection bound.
    Eigen::MatrixXd tiny = design;
    tiny.col(1) *= 1e-4;
    Eigen::VectorXi separated(20);
    for (int i = 0; i < 20; ++i) separated[i] = design(i, 1) > 0 ? 1 : 0;
    CHECK_THROWS_WITH_AS(fit_logistic(tiny, separated),
                         doctest::Contains("separation"), FitError);
}

TEST_CASE("normal linear: degenerate outcome model is rejected") {
    Eigen::MatrixXd design(12, 2);
    Eigen::VectorXd outcome(12);
    for (int i = 0; i < 12; ++i) {
        design(i, 0) = 1.0;
        design(i, 1) = 0.5 * i;
        outcome[i] = design.row(i).dot(Eigen::Vector2d(1.0, 2.0));
    }
    CHECK_THROWS_WITH_AS(fit_normal_linear(design, outcome),
                         doctest::Contains("degenerate outcome model"), FitError);
}

TEST_CASE("normal linear: fixed dataset matches the elimination oracle") {
    Eigen::MatrixXd design(10, 3);
    Eigen::VectorXd outcome(10);
    const double xs[10] = {0.1, 0.4, 0.9, 1.4, 2.0, 2.3, 2.9, 3.1, 3.8, 4.2};
    const double ys[10] = {1.2, 0.8, 2.1, 1.9, 3.3, 2.7, 4.4, 3.9, 5.1, 5.6};
    for (int i = 0; i < 10; ++i) {
        design(i, 0) = 1.0;
        design(i, 1) = xs[i];
        design(i, 2) = xs[i] * xs[i];
        outcome[i] = ys[i];
    }
    const NormalLinearFit fit = fit_normal_linear(design, outcome);
    const Eigen::VectorXd oracle = testsupport::gaussian_elimination_solve(
        design.transpose() * design, design.transpose() * outcome);
    for (int j = 0; j < 3; ++j) {
        CHECK(fit.beta[j] == doctest::Approx(oracle[j]).epsilon(1e-10));
    }

    // MLE scale uses the row-count divisor.
    const double rss = (outcome - design * oracle).squaredNorm();
    CHECK(fit.sigma == doctest::Approx(std::sqrt(rss / 10.0)).epsilon(1e-10));
}

TEST_CASE("normal linear: recovers the simulation outcome model for arm 1") {
    const SimulatedData sim = testsupport::dgp(100000, 100001, 123);
    const Eigen::MatrixXd design =
        design_matrix(sim.data, FeatureMap::linear_xs(1, 3), Rows::Validation);
    std::vector<Eigen::Index> rows;
    for (Eigen::Index i = 0; i < sim.data.n; ++i) {
        if (sim.data.t[i] == 1) rows.push_back(i);
    }
    Eigen::MatrixXd d1(static_cast<Eigen::Index>(rows.size()), 5);
    Eigen::VectorXd y1(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t j = 0; j < rows.size(); ++j) {
        d1.row(static_cast<Eigen::Index>(j)) = design.row(rows[j]);
        y1[static_cast<Eigen::Index>(j)] = sim.data.y[rows[j]];
    }
    const NormalLinearFit fit = fit_normal_linear(d1, y1, 1);
    const double expected[5] = {0.0, 0.5, -0.5, 0.5, -0.5};
    for (int j = 0; j < 5; ++j) {
        CHECK(std::abs(fit.beta[j] - expected[j]) < 0.05);
    }
    CHECK(std::abs(fit.sigma - 2.0) < 0.05);
}

TEST_CASE("normal linear: score identities and error paths") {
    Eigen::MatrixXd design(30, 2);
    Eigen::VectorXd outcome(30);
    Rng rng(5);
    for (int i = 0; i < 30; ++i) {
        design(i, 0) = 1.0;
        design(i, 1) = rng.uniform(-2.0, 2.0);
        outcome[i] = 0.7 - 0.4 * design(i, 1) + 0.8 * rng.normal();
    }
    const NormalLinearFit fit = fit_normal_linear(design, outcome);
    const Eigen::VectorXd score_mean = fit.scores.colwise().mean();
    CHECK(score_mean.lpNorm<Eigen::Infinity>() < 1e-6);
    CHECK((fit.hessian - fit.hessian.transpose()).norm() < 1e-12);

    const NormalLinearFit refit = fit_normal_linear(design, outcome);
    CHECK(refit.beta == fit.beta);
    CHECK(refit.sigma == fit.sigma);

    Eigen::MatrixXd rank_def(30, 3);
    rank_def.col(0) = design.col(0);
    rank_def.col(1) = design.col(1);
    rank_def.col(2) = 2.0 * design.col(1);
    CHECK_THROWS_AS(fit_normal_linear(rank_def, outcome), FitError);

    CHECK_THROWS_AS(fit_normal_linear(design.topRows(2), outcome.head(2)), FitError);
}

TEST_CASE("conditional cdf closed forms and quadrature oracle") {
    Eigen::MatrixXd design(30, 2);
    Eigen::VectorXd outcome(30);
    Rng rng(6);
    for (int i = 0; i < 30; ++i) {
        design(i, 0) = 1.0;
        design(i, 1) = rng.uniform(-2.0, 2.0);
        outcome[i] = 0.3 + 1.2 * design(i, 1) + 0.9 * rng.normal();
    }
    const NormalLinearFit fit = fit_normal_linear(design, outcome);
    Eigen::VectorXd row(2);
    row << 1.0, 0.8;
    const double center = fit.beta.dot(row);

    CHECK(conditional_cdf(fit, center, row) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(conditional_cdf(fit, center + 1.959964 * fit.sigma, row) ==
          doctest::Approx(0.975).epsilon(1e-6));

    // Quadrature of the normal density from far-left to y.
    for (double offset : {-1.3, -0.2, 0.4, 2.2, 0.9}) {
        const double y = center + offset;
        const double integral = testsupport::adaptive_simpson(
            [&](double u) {
                return testsupport::std_normal_pdf((u - center) / fit.sigma) / fit.sigma;
            },
            center - 12.0 * fit.sigma, y, 1e-13);
        CHECK(conditional_cdf(fit, y, row) == doctest::Approx(integral).epsilon(1e-8));
    }

    // Monotone in y.
    Rng mono(7);
    for (int rep = 0; rep < 200; ++rep) {
        const double y1 = mono.uniform(-6.0, 6.0);
        const double y2 = y1 + mono.uniform(0.0, 3.0);
        CHECK(conditional_cdf(fit, y1, row) <= conditional_cdf(fit, y2, row));
    }
}

TEST_CASE("conditional cdf gradient closed forms and finite differences") {
    Eigen::MatrixXd design(40, 3);
    Eigen::VectorXd outcome(40);
    Rng rng(8);
    for (int i = 0; i < 40; ++i) {
        design(i, 0) = 1.0;
        design(i, 1) = rng.uniform(-1.0, 2.0);
        design(i, 2) = rng.uniform(-2.0, 1.0);
        outcome[i] = 0.5 * design(i, 1) - design(i, 2) + rng.normal();
    }
    const NormalLinearFit fit = fit_normal_linear(design, outcome);
    Eigen::VectorXd row(3);
    row << 1.0, 0.4, -0.7;
    const double center = fit.beta.dot(row);

    // At the conditional mean: beta block is -phi(0)/sigma * d, sigma part 0.
    const Eigen::VectorXd g0 = conditional_cdf_grad(fit, center, row);
    const double factor = -normal_pdf(0.0) / fit.sigma;
    for (int j = 0; j < 3; ++j) {
        CHECK(g0[j] == doctest::Approx(factor * row[j]).epsilon(1e-12));
    }
    CHECK(std::abs(g0[3]) < 1e-14);

    Rng pts(9);
    for (int rep = 0; rep < 50; ++rep) {
        const double y = center + pts.uniform(-3.0, 3.0);
        const Eigen::VectorXd grad = conditional_cdf_grad(fit, y, row);
        NormalLinearFit bumped = fit;
        for (int j = 0; j < 4; ++j) {
            const double fd = testsupport::central_diff(
                [&](double v) {
                    bumped = fit;
                    if (j < 3) {
                        bumped.beta[j] = v;
                    } else {
                        bumped.sigma = v;
                    }
                    return conditional_cdf(bumped, y, row);
                },
                j < 3 ? fit.beta[j] : fit.sigma);
            CHECK(testsupport::rel_close(grad[j], fd, 1e-6, 1e-7));
        }
    }
}

TEST_CASE("propensity closed forms and finite differences") {
    LogisticFit fit;
    fit.alpha = Eigen::VectorXd::Zero(3);
    Eigen::VectorXd row(3);
    row << 1.0, 0.5, -0.25;
    CHECK(propensity(fit, row) == doctest::Approx(0.5).epsilon(1e-14));
    const Eigen::VectorXd grad0 = propensity_grad(fit, row);
    for (int j = 0; j < 3; ++j) {
        CHECK(grad0[j] == doctest::Approx(0.25 * row[j]).epsilon(1e-14));
    }

    fit.alpha << std::log(3.0), 0.0, 0.0;
    CHECK(propensity(fit, row) == doctest::Approx(0.75).epsilon(1e-12));

    Rng rng(11);
    for (int rep = 0; rep < 50; ++rep) {
        Eigen::VectorXd alpha(3), point(3);
        for (int j = 0; j < 3; ++j) {
            alpha[j] = rng.uniform(-1.5, 1.5);
            point[j] = rng.uniform(-2.0, 2.0);
        }
        fit.alpha = alpha;
        const Eigen::VectorXd grad = propensity_grad(fit, point);
        for (int j = 0; j < 3; ++j) {
            LogisticFit bumped = fit;
            const double fd = testsupport::central_diff(
                [&](double v) {
                    bumped.alpha = alpha;
                    bumped.alpha[j] = v;
                    return propensity(bumped, point);
                },
                alpha[j]);
            CHECK(testsupport::rel_close(grad[j], fd, 1e-6, 1e-7));
        }
    }
}
