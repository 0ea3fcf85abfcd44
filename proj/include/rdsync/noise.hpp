#pragma once

#include "rdsync/types.hpp"

#include <array>
#include <cstdint>

namespace rdsync {

// splitmix64 finalizer.
std::uint64_t mix64(std::uint64_t z);

// Seed of ensemble member `index` derived from a base seed:
//   member_seed(seed, i) = mix64(seed ^ mix64(i))
// where mix64 is the splitmix64 step (add 0x9e3779b97f4a7c15, then
// xor-shift-multiply by 0xbf58476d1ce4e5b9 and 0x94d049bb133111eb with shifts 30, 27, 31).
std::uint64_t member_seed(std::uint64_t seed, std::uint64_t index);

// Philox4x32-10 block function. Counter-based: the output is a pure function of (counter, key).
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter, std::array<std::uint32_t, 2> key);

// Standard normal variate keyed on (seed, global step index, component), via Box-Muller on
// the two 53-bit uniforms of one Philox block.
double keyed_normal(std::uint64_t seed, std::int64_t index, int component);

// Increments are rounded to multiples of this quantum, so every partial sum of a path is an
// exact dyadic rational and the shift algebra holds bitwise.
inline constexpr double kIncrementQuantum = 0x1p-32;

// Two-sided discrete Wiener path W on the grid k*delta, k in [k_min, k_max], with W(0) = 0.
// Increments are generated lazily from (seed, k + origin_offset, component); nothing is stored.
// shift(s) realizes theta_s: (theta_s W)(t) = W(t + s) - W(s).
class WienerPath {
 public:
  WienerPath(std::uint64_t seed, int dim, double delta, std::int64_t k_min, std::int64_t k_max,
             std::int64_t origin_offset = 0);

  std::uint64_t seed() const { return seed_; }
  int dim() const { return dim_; }
  double delta() const { return delta_; }
  std::int64_t k_min() const { return k_min_; }
  std::int64_t k_max() const { return k_max_; }
  std::int64_t origin_offset() const { return origin_offset_; }

  // Grid index of time t; throws WindowError unless t is a multiple of delta (relative tolerance 1e-9).
  std::int64_t index_of(double t) const;
  bool contains(std::int64_t k) const { return k >= k_min_ && k <= k_max_; }

  // W((k+1)delta) - W(k delta), component c. Throws WindowError if [k, k+1] leaves the window.
  double increment(std::int64_t k, int component) const;
  // Unchecked vector form for the integrators; `out` must have size dim().
  void increment_into(std::int64_t k, Vec& out) const;

  Vec value_at(std::int64_t k) const;
  Vec value(double t) const { return value_at(index_of(t)); }

  WienerPath shift_steps(std::int64_t n) const;
  WienerPath shift(double s) const { return shift_steps(index_of(s)); }

 private:
  double raw_increment(std::int64_t absolute_index, int component) const;

  std::uint64_t seed_;
  int dim_;
  double delta_;
  double sqrt_delta_;
  std::int64_t k_min_;
  std::int64_t k_max_;
  std::int64_t origin_offset_;
};

// Fresh path covering the model times [t_min, t_max] (which must contain 0).
WienerPath sample_path(std::uint64_t seed, int dim, double delta, double t_min, double t_max);

}  // namespace rdsync
