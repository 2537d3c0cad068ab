#include "fqte/mathutil.hpp"

#include "fqte/errors.hpp"

#include <cmath>

namespace fqte {

namespace {
constexpr double kSqrt2 = 1.4142135623730951;
constexpr double kInvSqrt2Pi = 0.3989422804014327;
constexpr double kSqrt2Pi = 2.5066282746310002;
}  // namespace

double normal_pdf(double z) { return kInvSqrt2Pi * std::exp(-0.5 * z * z); }

double normal_cdf(double z) { return 0.5 * std::erfc(-z / kSqrt2); }

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        throw ConfigError("normal_quantile: p must lie in (0,1)");
    }
    static const double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                -2.759285104469687e+02, 1.383577518672690e+02,
                                -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                -1.556989798598866e+02, 6.680131188771972e+01,
                                -1.328068155288572e+01};
    static const double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                -2.400758277161838e+00, -2.549732539343734e+00,
                                4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                                2.445134137142996e+00, 3.754408661907416e+00};
    const double plow = 0.02425;
    double x;
    if (p < plow) {
        double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - plow) {
        double q = p - 0.5;
        double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        double q = std::sqrt(-2.0 * std::log(1.0 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    // One Halley refinement using the exact CDF.
    double e = normal_cdf(x) - p;
    double u = e * kSqrt2Pi * std::exp(0.5 * x * x);
    x -= u / (1.0 + 0.5 * x * u);
    return x;
}

namespace {
// Neumaier's variant: compensates in both directions, so cancellation of
// large alternating terms does not drop the small ones.
inline void neumaier_step(double value, double& sum, double& comp) {
    const double t = sum + value;
    if (std::abs(sum) >= std::abs(value)) {
        comp += (sum - t) + value;
    } else {
        comp += (value - t) + sum;
    }
    sum = t;
}
}  // namespace

double kahan_sum(const double* values, std::size_t count) {
    double sum = 0.0;
    double comp = 0.0;
    for (std::size_t i = 0; i < count; ++i) neumaier_step(values[i], sum, comp);
    return sum + comp;
}

double kahan_sum(const Eigen::Ref<const Eigen::VectorXd>& values) {
    double sum = 0.0;
    double comp = 0.0;
    for (Eigen::Index i = 0; i < values.size(); ++i) neumaier_step(values[i], sum, comp);
    return sum + comp;
}

double weighted_quantile_sorted(const Eigen::VectorXd& values,
                                const Eigen::VectorXd& weights, double tau) {
    if (values.size() == 0 || values.size() != weights.size()) {
        throw ConfigError("weighted_quantile_sorted: bad input sizes");
    }
    const double total = weights.sum();
    if (!(total > 0.0)) {
        throw ConfigError("weighted_quantile_sorted: nonpositive total weight");
    }
    double cum = 0.0;
    for (Eigen::Index i = 0; i < values.size(); ++i) {
        cum += weights[i];
        if (cum >= tau * total) return values[i];
    }
    return values[values.size() - 1];
}

}  // namespace fqte
