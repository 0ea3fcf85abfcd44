#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace rdsync {

// Linear-interpolation sample quantile (Hyndman-Fan type 7). Empty input gives NaN.
double quantile(std::vector<double> values, double q);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

// Wilson score interval for a binomial proportion at normal quantile z (default 95%).
Interval wilson_interval(std::size_t successes, std::size_t n, double z = 1.959963984540054);

struct MeanSE {
  double mean = 0.0;
  double se = 0.0;
};

// Mean of `values` with the standard error of the mean of n_blocks equal consecutive blocks
// (a trailing remainder shorter than one block is dropped from the SE but kept in the mean).
MeanSE block_mean_se(std::span<const double> values, int n_blocks);

// Mean and standard error treating values as independent.
MeanSE mean_se(std::span<const double> values);

// Radical inverse of `index` in the given prime base (Halton coordinate).
double radical_inverse(std::uint64_t index, int base);
int nth_prime(int n);  // nth_prime(0) == 2

}  // namespace rdsync
