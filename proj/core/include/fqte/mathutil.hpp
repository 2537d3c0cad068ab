#pragma once

#include <Eigen/Core>
#include <cstddef>

namespace fqte {

/// Standard normal density.
double normal_pdf(double z);

/// Standard normal CDF via erfc (accurate in both tails).
double normal_cdf(double z);

/// Standard normal quantile function for p in (0,1).
/// Acklam's rational approximation polished with one Halley step (~1e-15).
double normal_quantile(double p);

/// Kahan compensated sum over a contiguous range, index-ascending order.
double kahan_sum(const double* values, std::size_t count);
double kahan_sum(const Eigen::Ref<const Eigen::VectorXd>& values);

/// Smallest sorted value whose cumulative normalized weight reaches tau.
/// `values` must be ascending; weights nonnegative with a positive total.
double weighted_quantile_sorted(const Eigen::VectorXd& values,
                                const Eigen::VectorXd& weights, double tau);

}  // namespace fqte
