#include "rdsync/stats.hpp"

#include "rdsync/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace rdsync {

double quantile(std::vector<double> values, double q) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const double h = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

Interval wilson_interval(std::size_t successes, std::size_t n, double z) {
  if (n == 0) return {0.0, 1.0};
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(successes) / nn;
  const double z2 = z * z;
  const double center = (p + z2 / (2.0 * nn)) / (1.0 + z2 / nn);
  const double half = z * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn)) / (1.0 + z2 / nn);
  return {std::max(0.0, std::min(center - half, p)), std::min(1.0, std::max(center + half, p))};
}

MeanSE mean_se(std::span<const double> values) {
  MeanSE r;
  if (values.empty()) return r;
  const double n = static_cast<double>(values.size());
  r.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() < 2) return r;
  double ss = 0.0;
  for (double v : values) ss += (v - r.mean) * (v - r.mean);
  r.se = std::sqrt(ss / (n - 1.0) / n);
  return r;
}

MeanSE block_mean_se(std::span<const double> values, int n_blocks) {
  if (n_blocks < 2) throw DomainError("block averaging needs at least two blocks");
  MeanSE r;
  if (values.empty()) return r;
  r.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  const std::size_t len = values.size() / static_cast<std::size_t>(n_blocks);
  if (len == 0) return mean_se(values);
  std::vector<double> means;
  for (int b = 0; b < n_blocks; ++b) {
    const auto first = values.begin() + static_cast<std::ptrdiff_t>(b * len);
    means.push_back(std::accumulate(first, first + static_cast<std::ptrdiff_t>(len), 0.0) / static_cast<double>(len));
  }
  r.se = mean_se(means).se;
  return r;
}

double radical_inverse(std::uint64_t index, int base) {
  const double inv = 1.0 / base;
  double f = inv, r = 0.0;
  while (index > 0) {
    r += f * static_cast<double>(index % static_cast<std::uint64_t>(base));
    index /= static_cast<std::uint64_t>(base);
    f *= inv;
  }
  return r;
}

int nth_prime(int n) {
  static const int primes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73,
                               79, 83, 89, 97, 101, 103, 107, 109, 113, 127, 131, 137, 139, 149, 151, 157, 163};
  if (n < 0 || n >= static_cast<int>(std::size(primes))) throw DomainError("Halton dimension too large");
  return primes[n];
}

}  // namespace rdsync
