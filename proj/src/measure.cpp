#include "rdsync/measure.hpp"

#include "rdsync/error.hpp"
#include "rdsync/noise.hpp"
#include "rdsync/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace rdsync {

void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights) {
  nodes.assign(static_cast<std::size_t>(n), 0.0);
  weights.assign(static_cast<std::size_t>(n), 0.0);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 1; j <= n; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j - 1.0) * z * p1 - (j - 1.0) * p2) / j;
      }
      dp = n * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-15) break;
    }
    nodes[static_cast<std::size_t>(i)] = -z;
    nodes[static_cast<std::size_t>(n - 1 - i)] = z;
    const double w = 2.0 / ((1.0 - z * z) * dp * dp);
    weights[static_cast<std::size_t>(i)] = w;
    weights[static_cast<std::size_t>(n - 1 - i)] = w;
  }
}

namespace {

// Composite Gauss-Legendre rule on [a, b] with `panels` panels of `order` nodes.
void composite_rule(double a, double b, int panels, int order, std::vector<double>& x, std::vector<double>& w) {
  std::vector<double> gn, gw;
  gauss_legendre(order, gn, gw);
  x.clear();
  w.clear();
  const double h = (b - a) / panels;
  for (int p = 0; p < panels; ++p) {
    const double mid = a + (p + 0.5) * h;
    for (int i = 0; i < order; ++i) {
      x.push_back(mid + 0.5 * h * gn[static_cast<std::size_t>(i)]);
      w.push_back(0.5 * h * gw[static_cast<std::size_t>(i)]);
    }
  }
}

std::size_t ipow(std::size_t base, int e) {
  std::size_t r = 1;
  for (int i = 0; i < e; ++i) r *= base;
  return r;
}

}  // namespace

double GibbsMeasure::Z() const { return std::exp(log_z_); }

double GibbsMeasure::unnormalized(const Vec& x) const {
  return std::exp(-2.0 * (field_.potential(x) - v_ref_) / (sigma_ * sigma_));
}

double GibbsMeasure::density(const Vec& x) const {
  return std::exp(-2.0 * field_.potential(x) / (sigma_ * sigma_) - log_z_);
}

Vec GibbsMeasure::fine_point(std::size_t flat) const {
  const int d = field_.dim();
  const double h = (box_.hi - box_.lo) / (n_fine_ - 1);
  Vec x(d);
  for (int a = 0; a < d; ++a) {
    x[a] = box_.lo + h * static_cast<double>(flat % static_cast<std::size_t>(n_fine_));
    flat /= static_cast<std::size_t>(n_fine_);
  }
  return x;
}

QuadratureResult GibbsMeasure::expect(const std::function<double(const Vec&)>& f) const {
  const int d = field_.dim();
  const double coarse_factor = std::ldexp(1.0, d);
  double fine = 0.0, coarse = 0.0;
  const auto nf = static_cast<std::size_t>(n_fine_);
  for (std::size_t i = 0; i < weights_fine_.size(); ++i) {
    const Vec x = fine_point(i);
    const double v = f(x);
    if (!std::isfinite(v)) throw NumericRangeError("expectation integrand is not finite on the quadrature grid");
    const double wv = weights_fine_[i] * v;
    fine += wv;
    bool on_coarse = true;
    for (std::size_t rest = i; rest > 0 && on_coarse; rest /= nf) on_coarse = (rest % nf) % 2 == 0;
    if (on_coarse) coarse += coarse_factor * wv;
  }
  const double vf = fine / z_fine_rel_, vc = coarse / z_coarse_rel_;
  return {vf, std::abs(vf - vc)};
}

QuadratureResult GibbsMeasure::ball_mass(double R, const Vec& center) const {
  const int d = field_.dim();
  if (!(R >= 0.0)) throw DomainError("ball radius must be non-negative");
  if (center.size() != d) throw DomainError("ball center has the wrong dimension");
  if (R == 0.0) return {0.0, 0.0};
  auto integrate = [&](int level) {
    std::vector<double> rx, rw, ux, uw;
    double total = 0.0;
    Vec x(d);
    if (d == 1) {
      composite_rule(center[0] - R, center[0] + R, 16 * level, 16, rx, rw);
      for (std::size_t i = 0; i < rx.size(); ++i) {
        x[0] = rx[i];
        total += rw[i] * density(x);
      }
    } else if (d == 2) {
      composite_rule(0.0, R, 16 * level, 16, rx, rw);
      const int m = 256 * level;
      for (std::size_t i = 0; i < rx.size(); ++i)
        for (int j = 0; j < m; ++j) {
          const double th = kTwoPi * j / m;
          x[0] = center[0] + rx[i] * std::cos(th);
          x[1] = center[1] + rx[i] * std::sin(th);
          total += rw[i] * rx[i] * (kTwoPi / m) * density(x);
        }
    } else if (d == 3) {
      composite_rule(0.0, R, 8 * level, 16, rx, rw);
      composite_rule(-1.0, 1.0, 4 * level, 16, ux, uw);
      const int m = 64 * level;
      for (std::size_t i = 0; i < rx.size(); ++i)
        for (std::size_t k = 0; k < ux.size(); ++k) {
          const double s = std::sqrt(std::max(0.0, 1.0 - ux[k] * ux[k]));
          for (int j = 0; j < m; ++j) {
            const double ph = kTwoPi * j / m;
            x[0] = center[0] + rx[i] * s * std::cos(ph);
            x[1] = center[1] + rx[i] * s * std::sin(ph);
            x[2] = center[2] + rx[i] * ux[k];
            total += rw[i] * rx[i] * rx[i] * uw[k] * (kTwoPi / m) * density(x);
          }
        }
    } else {
      throw DomainError("ball_mass supports d <= 3");
    }
    return total;
  };
  const double coarse = integrate(1);
  const double fine = integrate(2);
  return {fine, std::abs(fine - coarse)};
}

double GibbsMeasure::cell_mass(const Vec& lower, const Vec& upper) const {
  const int d = field_.dim();
  if (lower.size() != d || upper.size() != d) throw DomainError("cell bounds have the wrong dimension");
  std::vector<std::vector<double>> xs(static_cast<std::size_t>(d)), ws(static_cast<std::size_t>(d));
  for (int a = 0; a < d; ++a)
    composite_rule(lower[a], upper[a], 4, 16, xs[static_cast<std::size_t>(a)], ws[static_cast<std::size_t>(a)]);
  const std::size_t per = xs[0].size();
  const std::size_t total_points = ipow(per, d);
  double total = 0.0;
  Vec x(d);
  for (std::size_t flat = 0; flat < total_points; ++flat) {
    double w = 1.0;
    std::size_t rest = flat;
    for (int a = 0; a < d; ++a) {
      const std::size_t i = rest % per;
      rest /= per;
      x[a] = xs[static_cast<std::size_t>(a)][i];
      w *= ws[static_cast<std::size_t>(a)][i];
    }
    total += w * density(x);
  }
  return total;
}

GibbsMeasure normalize(const DriftField& field, double sigma, const GibbsOptions& options) {
  if (!field.is_gradient()) throw DomainError("Gibbs measure needs a gradient-type field (no potential for '" + field.name() + "')");
  const int d = field.dim();
  if (d > 3) throw DomainError("tensor quadrature supports d <= 3; use mc_expect");
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw DomainError("sigma must be positive");
  GibbsMeasure g(field, sigma);
  g.n_ = options.points_per_axis > 0 ? options.points_per_axis : (d == 1 ? 801 : d == 2 ? 401 : 61);
  if (g.n_ < 3) throw DomainError("need at least 3 grid points per axis");
  g.n_fine_ = 2 * g.n_ - 1;
  Box box = options.box.value_or(Box{});
  if (!(box.hi > box.lo)) throw DomainError("empty quadrature box");

  const auto nf = static_cast<std::size_t>(g.n_fine_);
  const std::size_t total = ipow(nf, d);
  const double s2 = sigma * sigma;
  std::vector<double> potential(total);
  for (int attempt = 0;; ++attempt) {
    g.box_ = box;
    const double h = (box.hi - box.lo) / (g.n_fine_ - 1);
    const double center = 0.5 * (box.lo + box.hi), half = 0.5 * (box.hi - box.lo);
    double vmin = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < total; ++i) {
      potential[i] = field.potential(g.fine_point(i));
      if (std::isnan(potential[i])) throw NumericRangeError("potential is NaN on the quadrature grid");
      vmin = std::min(vmin, potential[i]);
    }
    g.v_ref_ = vmin;
    g.weights_fine_.assign(total, 0.0);
    double z_fine = 0.0, z_coarse = 0.0, shell = 0.0;
    const double coarse_factor = std::ldexp(1.0, d);
    for (std::size_t i = 0; i < total; ++i) {
      double w = 1.0;
      bool on_coarse = true, in_shell = false;
      std::size_t rest = i;
      for (int a = 0; a < d; ++a) {
        const std::size_t idx = rest % nf;
        rest /= nf;
        w *= (idx == 0 || idx == nf - 1) ? 0.5 * h : h;
        on_coarse = on_coarse && idx % 2 == 0;
        const double xa = box.lo + h * static_cast<double>(idx);
        in_shell = in_shell || std::abs(xa - center) >= 0.9 * half;
      }
      const double wd = w * std::exp(-2.0 * (potential[i] - vmin) / s2);
      g.weights_fine_[i] = wd;
      z_fine += wd;
      if (on_coarse) z_coarse += coarse_factor * wd;
      if (in_shell) shell += wd;
    }
    g.z_fine_rel_ = z_fine;
    g.z_coarse_rel_ = z_coarse;
    g.tail_ = shell / z_fine;
    if (g.tail_ < options.tail_tolerance) break;
    if (options.box || attempt >= options.max_expansions)
      throw NumericRangeError("density exp(-2V/sigma^2) does not decay: boundary-shell mass " +
                              std::to_string(g.tail_) + " exceeds tolerance (not integrable?)");
    box = {center - 1.5 * half, center + 1.5 * half};
  }
  g.log_z_ = std::log(g.z_fine_rel_) - 2.0 * g.v_ref_ / s2;
  g.z_refinement_ = std::abs(g.z_fine_rel_ - g.z_coarse_rel_) / g.z_fine_rel_;
  if (g.z_refinement_ > options.refinement_tolerance)
    throw ConvergenceError("normalization changed by " + std::to_string(g.z_refinement_) +
                           " under grid refinement; increase points_per_axis");
  return g;
}

Points sample_stationary(const DriftField& field, double sigma, std::size_t n, std::uint64_t seed,
                         const SampleOptions& options, const Vec& x0) {
  Points out;
  if (n == 0) return out;
  if (!(options.burn_in > 0.0) || !(options.thin > 0.0)) throw DomainError("burn_in and thin must be positive");
  const auto burn_steps = static_cast<std::int64_t>(std::llround(options.burn_in / options.dt));
  const auto thin_steps = std::max<std::int64_t>(1, std::llround(options.thin / options.dt));
  const std::int64_t total = burn_steps + static_cast<std::int64_t>(n - 1) * thin_steps;
  const WienerPath path(seed, field.noise_dim(), options.dt, 0, total);
  Stepper stepper(field, IntegratorSpec{options.scheme, options.dt}, sigma);
  Vec x = x0, dw(path.dim());
  wrap_state(field, x);
  out.reserve(n);
  for (std::int64_t k = 0; k <= total; ++k) {
    if (k >= burn_steps && (k - burn_steps) % thin_steps == 0) out.push_back(x);
    if (k == total) break;
    path.increment_into(k, dw);
    if (!stepper.step(x, dw))
      throw NumericRangeError("trajectory exploded while sampling at t = " + std::to_string(k * options.dt));
  }
  return out;
}

double default_thin(const GibbsMeasure& gibbs) {
  const double avg = gibbs.expect([&](const Vec& x) { return lambda_plus(gibbs.field(), x); }).value;
  if (!(avg < 0.0)) return 1.0;
  return std::clamp(1.0 / std::abs(avg), 0.1, 10.0);
}

Points sample(const GibbsMeasure& gibbs, std::size_t n, std::uint64_t seed, double burn_in, double thin) {
  SampleOptions opt;
  opt.burn_in = burn_in;
  opt.thin = thin > 0.0 ? thin : default_thin(gibbs);
  return sample_stationary(gibbs.field(), gibbs.sigma(), n, seed, opt, Vec::Zero(gibbs.field().dim()));
}

MonteCarloEstimate mc_expect(const GibbsSpec& spec, const std::function<double(const Vec&)>& f, std::size_t n,
                             std::uint64_t seed) {
  if (n == 0) throw DomainError("mc_expect needs at least one sample");
  const Points pts = sample_stationary(spec.field, spec.sigma, n, seed, spec.sampling, Vec::Zero(spec.field.dim()));
  std::vector<double> values;
  values.reserve(pts.size());
  for (const auto& p : pts) {
    const double v = f(p);
    if (!std::isfinite(v)) throw NumericRangeError("mc_expect integrand is not finite at a sample");
    values.push_back(v);
  }
  const MeanSE m = values.size() >= 40 ? block_mean_se(values, 20) : mean_se(values);
  return {m.mean, m.se};
}

}  // namespace rdsync
