#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace robgxe::stats {

/// Smallest value whose cumulative weight reaches half of the total weight.
/// Returns 0 when every weight is zero.
double weighted_median(std::span<const double> values, std::span<const double> weights);

/// Weighted median absolute deviation around the weighted median (unscaled).
double weighted_mad(std::span<const double> values, std::span<const double> weights);

/// Sample quantile with linear interpolation between order statistics
/// (Hyndman-Fan type 7). `prob` in [0, 1]; `values` must be non-empty.
double quantile(std::vector<double> values, double prob);

double normal_cdf(double x);

/// Two-sided p-value of a standard normal statistic.
double normal_two_sided_p(double z);

/// P(X >= k) for X ~ Binomial(m, 1/2).
double binomial_upper_tail_half(int m, int k);

/// splitmix64 mixing of a base seed with a stream identifier.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

} // namespace robgxe::stats
