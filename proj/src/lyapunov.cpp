#include "rdsync/lyapunov.hpp"

#include "rdsync/error.hpp"
#include "rdsync/noise.hpp"
#include "rdsync/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace rdsync {

LyapunovSpectrum spectrum_benettin(const DriftField& field, double sigma, std::uint64_t seed, const Vec& x0,
                                   const LyapunovOptions& opt) {
  const double burn_in = opt.burn_in < 0.0 ? opt.T / 10.0 : opt.burn_in;
  if (!(opt.T > burn_in)) throw DomainError("T must exceed burn_in");
  if (opt.k < 1 || opt.k > field.dim()) throw DomainError("k must satisfy 1 <= k <= d");
  if (opt.qr_every < 1) throw DomainError("qr_every must be at least 1");
  if (opt.n_blocks < 2) throw DomainError("need at least two blocks");

  const auto burn_steps = static_cast<std::int64_t>(std::llround(burn_in / opt.dt));
  const auto total_steps = static_cast<std::int64_t>(std::llround(opt.T / opt.dt));
  const std::int64_t main_steps = total_steps - burn_steps;
  const std::int64_t block_steps = main_steps / opt.n_blocks;
  if (block_steps < 1) throw DomainError("averaging window too short for the requested number of blocks");

  const WienerPath path(seed, field.noise_dim(), opt.dt, 0, total_steps);
  IntegratorSpec spec;
  spec.scheme = opt.scheme;
  spec.dt = opt.dt;
  TangentIntegrator ti(field, spec, sigma, path, x0, opt.k, 0);
  if (burn_steps > 0) ti.advance(burn_steps, opt.qr_every);
  ti.reset_accumulators();

  LyapunovSpectrum out;
  out.dt = opt.dt;
  out.seed = seed;
  out.x0 = x0;
  const int k = opt.k;
  std::vector<std::vector<double>> block_rates(static_cast<std::size_t>(k));
  const int chunks_per_block = std::max(1, opt.running_points / opt.n_blocks);
  std::int64_t done = 0;
  Vec block_start = ti.frame().log_r;
  for (int b = 0; b < opt.n_blocks; ++b) {
    const std::int64_t len = b + 1 == opt.n_blocks ? main_steps - done : block_steps;
    // The last block absorbs the remainder; its rate is still per unit time.
    std::int64_t in_block = 0;
    for (int c = 0; c < chunks_per_block; ++c) {
      const std::int64_t n = c + 1 == chunks_per_block ? len - in_block : len / chunks_per_block;
      if (n <= 0) continue;
      ti.advance(n, opt.qr_every, true);
      in_block += n;
      done += n;
      RunningEstimate r{static_cast<double>(done) * opt.dt, {}};
      for (int i = 0; i < k; ++i) r.exponents.push_back(ti.frame().log_r[i] / r.t);
      out.running.push_back(std::move(r));
    }
    const Vec& lr = ti.frame().log_r;
    for (int i = 0; i < k; ++i)
      block_rates[static_cast<std::size_t>(i)].push_back((lr[i] - block_start[i]) / (static_cast<double>(len) * opt.dt));
    block_start = lr;
  }
  out.T_effective = static_cast<double>(main_steps) * opt.dt;
  out.max_orthonormality_error = ti.frame().max_orthonormality_error;

  std::vector<std::pair<double, double>> pairs;
  for (int i = 0; i < k; ++i) {
    const double lambda = ti.frame().log_r[i] / out.T_effective;
    const double se = mean_se(block_rates[static_cast<std::size_t>(i)]).se;
    pairs.emplace_back(lambda, se);
  }
  std::stable_sort(pairs.begin(), pairs.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (const auto& [l, s] : pairs) {
    out.exponents.push_back(l);
    out.block_std_errors.push_back(s);
  }
  return out;
}

namespace {

// Difference y - x in the chart metric (shortest signed angle on the circle).
Vec chart_difference(const DriftField& field, const Vec& y, const Vec& x) {
  Vec d = y - x;
  if (field.periodic())
    for (Eigen::Index i = 0; i < d.size(); ++i) d[i] = std::remainder(d[i], kTwoPi);
  return d;
}

}  // namespace

TwoPointEstimate top_exponent_twopoint(const DriftField& field, double sigma, std::uint64_t seed, const Vec& x0,
                                       const TwoPointOptions& opt) {
  if (!(opt.delta0 > 0.0)) throw DomainError("delta0 must be positive");
  if (!(opt.renorm_threshold > 1.0)) throw DomainError("renorm_threshold must exceed 1");
  if (x0.size() != field.dim()) throw DomainError("x0 has the wrong dimension");
  const auto total_steps = static_cast<std::int64_t>(std::llround(opt.T / opt.dt));
  const std::int64_t block_steps = total_steps / opt.n_blocks;
  if (block_steps < 1) throw DomainError("T too short for the requested number of blocks");

  const WienerPath path(seed, field.noise_dim(), opt.dt, 0, total_steps);
  IntegratorSpec spec;
  spec.scheme = opt.scheme;
  spec.dt = opt.dt;
  Stepper stepper(field, spec, sigma);
  Vec x = x0;
  wrap_state(field, x);
  const Vec dir = Vec::Ones(field.dim()).normalized();
  Vec y = x + opt.delta0 * dir;
  wrap_state(field, y);
  Vec dw(path.dim());

  std::vector<double> block_rates;
  double total_log = 0.0, block_log = 0.0;
  auto renormalize = [&](std::int64_t k) {
    const Vec diff = chart_difference(field, y, x);
    const double sep = diff.norm();
    if (!(sep > 0.0)) throw ConvergenceError("two-point separation underflow (increase delta0)", k);
    const double g = std::log(sep / opt.delta0);
    total_log += g;
    block_log += g;
    y = x + (opt.delta0 / sep) * diff;
    wrap_state(field, y);
  };
  for (std::int64_t k = 0; k < total_steps; ++k) {
    path.increment_into(k, dw);
    if (!stepper.step(x, dw) || !stepper.step(y, dw))
      throw NumericRangeError("trajectory exploded in two-point estimate at step " + std::to_string(k));
    const double sep = chart_difference(field, y, x).norm();
    const bool block_end = (k + 1) % block_steps == 0 || k + 1 == total_steps;
    if (block_end || sep > opt.delta0 * opt.renorm_threshold || sep < opt.delta0 / opt.renorm_threshold)
      renormalize(k);
    if ((k + 1) % block_steps == 0 && static_cast<int>(block_rates.size()) < opt.n_blocks) {
      std::int64_t len = block_steps;
      block_rates.push_back(block_log / (static_cast<double>(len) * opt.dt));
      block_log = 0.0;
    }
  }
  TwoPointEstimate est;
  est.exponent = total_log / (static_cast<double>(total_steps) * opt.dt);
  est.std_error = mean_se(block_rates).se;
  return est;
}

QuadratureResult lambda_plus_bound(const DriftField& field, const GibbsMeasure& gibbs) {
  if (field.dim() != gibbs.field().dim()) throw DomainError("field and Gibbs measure dimensions differ");
  return gibbs.expect([&](const Vec& x) { return lambda_plus(field, x); });
}

QuadratureResult gradient_1d_exponent(const DriftField& field, const GibbsMeasure& gibbs) {
  if (field.dim() != 1) throw DomainError("gradient_1d_exponent requires d = 1");
  if (!field.is_gradient()) throw DomainError("gradient_1d_exponent requires a gradient-type field");
  return gibbs.expect([&](const Vec& x) { return field.jacobian(x)(0, 0); });
}

}  // namespace rdsync
