#include "rdsync/noise.hpp"

#include "rdsync/error.hpp"

#include <cmath>

namespace rdsync {

std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t member_seed(std::uint64_t seed, std::uint64_t index) { return mix64(seed ^ mix64(index)); }

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> c, std::array<std::uint32_t, 2> k) {
  constexpr std::uint64_t kM0 = 0xD2511F53u, kM1 = 0xCD9E8D57u;
  constexpr std::uint32_t kW0 = 0x9E3779B9u, kW1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = kM0 * c[0];
    const std::uint64_t p1 = kM1 * c[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
    c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
    k[0] += kW0;
    k[1] += kW1;
  }
  return c;
}

double keyed_normal(std::uint64_t seed, std::int64_t index, int component) {
  const auto uindex = static_cast<std::uint64_t>(index);
  const auto out = philox4x32({static_cast<std::uint32_t>(uindex), static_cast<std::uint32_t>(uindex >> 32),
                               static_cast<std::uint32_t>(component), 0u},
                              {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)});
  const std::uint64_t a = (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
  const std::uint64_t b = (static_cast<std::uint64_t>(out[2]) << 32) | out[3];
  // Uniforms on the open interval (0, 1).
  const double u1 = (static_cast<double>(a >> 11) + 0.5) * 0x1p-53;
  const double u2 = (static_cast<double>(b >> 11) + 0.5) * 0x1p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
}

WienerPath::WienerPath(std::uint64_t seed, int dim, double delta, std::int64_t k_min, std::int64_t k_max,
                       std::int64_t origin_offset)
    : seed_(seed),
      dim_(dim),
      delta_(delta),
      sqrt_delta_(std::sqrt(delta)),
      k_min_(k_min),
      k_max_(k_max),
      origin_offset_(origin_offset) {
  if (!(delta > 0.0) || !std::isfinite(delta)) throw DomainError("noise delta must be positive and finite");
  if (dim < 1) throw DomainError("noise dimension must be positive");
  if (k_min > 0 || k_max < 0) throw WindowError("noise window must contain time 0");
}

std::int64_t WienerPath::index_of(double t) const {
  const double q = t / delta_;
  const double r = std::nearbyint(q);
  if (!std::isfinite(q) || std::abs(q - r) > 1e-9 * std::max(1.0, std::abs(q)))
    throw WindowError("time " + std::to_string(t) + " is not a multiple of delta " + std::to_string(delta_));
  return static_cast<std::int64_t>(r);
}

double WienerPath::raw_increment(std::int64_t absolute_index, int component) const {
  const double z = keyed_normal(seed_, absolute_index, component);
  return std::nearbyint(z * sqrt_delta_ / kIncrementQuantum) * kIncrementQuantum;
}

double WienerPath::increment(std::int64_t k, int component) const {
  if (k < k_min_ || k + 1 > k_max_)
    throw WindowError("increment index " + std::to_string(k) + " outside window [" + std::to_string(k_min_) +
                      ", " + std::to_string(k_max_) + "]");
  if (component < 0 || component >= dim_) throw DomainError("noise component out of range");
  return raw_increment(k + origin_offset_, component);
}

void WienerPath::increment_into(std::int64_t k, Vec& out) const {
  for (int c = 0; c < dim_; ++c) out[c] = raw_increment(k + origin_offset_, c);
}

Vec WienerPath::value_at(std::int64_t k) const {
  if (!contains(k))
    throw WindowError("time index " + std::to_string(k) + " outside window [" + std::to_string(k_min_) + ", " +
                      std::to_string(k_max_) + "]");
  Vec w = Vec::Zero(dim_);
  if (k > 0) {
    for (std::int64_t j = 0; j < k; ++j)
      for (int c = 0; c < dim_; ++c) w[c] += raw_increment(j + origin_offset_, c);
  } else if (k < 0) {
    for (std::int64_t j = k; j < 0; ++j)
      for (int c = 0; c < dim_; ++c) w[c] += raw_increment(j + origin_offset_, c);
    w = -w;
  }
  return w;
}

WienerPath WienerPath::shift_steps(std::int64_t n) const {
  if (!contains(n)) throw WindowError("shift by " + std::to_string(n) + " steps leaves the window");
  return WienerPath(seed_, dim_, delta_, k_min_ - n, k_max_ - n, origin_offset_ + n);
}

WienerPath sample_path(std::uint64_t seed, int dim, double delta, double t_min, double t_max) {
  if (!(delta > 0.0)) throw DomainError("noise delta must be positive");
  if (t_min > 0.0 || t_max < 0.0 || t_min > t_max) throw WindowError("noise window must contain time 0");
  const auto lo = static_cast<std::int64_t>(std::floor(t_min / delta + 1e-9));
  const auto hi = static_cast<std::int64_t>(std::ceil(t_max / delta - 1e-9));
  return WienerPath(seed, dim, delta, lo, hi, 0);
}

}  // namespace rdsync
