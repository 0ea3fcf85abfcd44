#include "doctest.h"
#include "rdsync/error.hpp"
#include "rdsync/measure.hpp"
#include "rdsync/stats.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <cmath>

using namespace rdsync;

namespace {

DriftField builtin(FieldKind kind, int dim = 0) {
  BuiltinSpec s;
  s.kind = kind;
  s.dim = dim;
  return build(s);
}

Vec vec(std::initializer_list<double> v) {
  Vec x(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double c : v) x[i++] = c;
  return x;
}

const double kSqrt2 = std::sqrt(2.0);

}  // namespace

TEST_CASE("Gaussian closed forms") {
  // V = |x|^2/2 with sigma = sqrt(2) gives the standard normal density.
  const auto g1 = normalize(builtin(FieldKind::ou, 1), kSqrt2);
  CHECK(std::abs(g1.Z() - std::sqrt(2 * M_PI)) < 1e-6);
  CHECK(std::abs(g1.expect([](const Vec& x) { return x[0]; }).value) < 1e-8);
  CHECK(std::abs(g1.expect([](const Vec& x) { return x[0] * x[0]; }).value - 1.0) < 1e-6);
  CHECK(std::abs(g1.ball_mass(1.0).value - std::erf(1.0 / kSqrt2)) < 1e-6);
  CHECK(std::abs(g1.ball_mass(1.0).value - 0.682689) < 1e-5);
  CHECK(std::abs(g1.density(vec({0})) - 1.0 / std::sqrt(2 * M_PI)) < 1e-9);

  const auto g2 = normalize(builtin(FieldKind::ou, 2), kSqrt2);
  CHECK(std::abs(g2.Z() - 2 * M_PI) < 1e-6);
  CHECK(std::abs(g2.ball_mass(1.0).value - (1 - std::exp(-0.5))) < 1e-6);
  CHECK(std::abs(g2.expect([](const Vec& x) { return x.squaredNorm(); }).value - 2.0) < 1e-6);
  CHECK(std::abs(g2.expect([](const Vec& x) { return x[0] * x[1]; }).value) < 1e-8);
  CHECK(std::abs(g2.expect([](const Vec&) { return 1.0; }).value - 1.0) < 1e-6);
  CHECK(g2.tail_mass_estimate() < 1e-8);

  // Off-center ball: rho(B((1,0), 1)) against a 1-D reduction by Simpson's rule.
  const double off = g2.ball_mass(1.0, vec({1, 0})).value;
  double ref = 0;
  const int n = 20000;
  for (int i = 0; i <= n; ++i) {
    const double x = 2.0 * i / n, w = (i == 0 || i == n) ? 1 : (i % 2 ? 4 : 2);
    const double h = std::sqrt(std::max(0.0, 1 - (x - 1) * (x - 1)));
    ref += w * std::exp(-x * x / 2) / std::sqrt(2 * M_PI) * std::erf(h / kSqrt2);
  }
  ref *= (2.0 / n) / 3;
  CHECK(std::abs(off - ref) < 1e-6);
}

TEST_CASE("normalization is stable under refinement") {
  const auto g = normalize(builtin(FieldKind::double_well, 1), 1.0);
  CHECK(g.normalization_refinement() < 1e-6);
  CHECK(std::abs(g.expect([](const Vec&) { return 1.0; }).value - 1.0) < 1e-6);
  const auto g3 = normalize(builtin(FieldKind::double_well, 3), 1.0);
  CHECK(std::abs(g3.expect([](const Vec&) { return 1.0; }).value - 1.0) < 1e-6);
  CHECK(std::abs(g3.ball_mass(10.0).value - 1.0) < 1e-6);
}

TEST_CASE("flattening: ball mass decreases in sigma") {
  for (FieldKind k : {FieldKind::v_e, FieldKind::double_well}) {
    const auto f = builtin(k, 2);
    double previous = 2.0;
    for (double sigma : {1.0, 2.0, 4.0, 8.0}) {
      const double m = normalize(f, sigma).ball_mass(2.0).value;
      CHECK(m < previous);
      previous = m;
    }
  }
}

TEST_CASE("errors") {
  BuiltinSpec lin;
  lin.kind = FieldKind::linear;
  lin.matrix = Mat(2, 2);
  lin.matrix << -1, 1, 0, -1;
  CHECK_THROWS_AS(normalize(build(lin), 1.0), DomainError);
  CHECK_THROWS_AS(normalize(builtin(FieldKind::ou, 4), 1.0), DomainError);
  CHECK_THROWS_AS(normalize(builtin(FieldKind::ou, 1), 0.0), DomainError);
  const auto flat = build_custom("flat", 1, {}, std::string("0.01*tanh(x1)"), std::nullopt);
  CHECK_THROWS_AS(normalize(flat, 1.0), NumericRangeError);
  const auto g = normalize(builtin(FieldKind::ou, 1), 1.0);
  CHECK_THROWS_AS(g.expect([](const Vec& x) { return 1.0 / x[0]; }), NumericRangeError);
}

TEST_CASE("long-run sampling reproduces the Gibbs measure") {
  CHECK(sample(normalize(builtin(FieldKind::ou, 1), 1.0), 0, 1, 10.0, 1.0).empty());

  // OU stationary covariance sigma^2/2 I, checked per entry with a batch-means SE.
  const double sigma = 1.5;
  const auto gauss = normalize(builtin(FieldKind::ou, 2), sigma);
  const Points pts = sample(gauss, 20000, 7, 10.0, 0.0);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      std::vector<double> v;
      for (const auto& p : pts) v.push_back(p[i] * p[j]);
      const auto m = block_mean_se(v, 20);
      CHECK(std::abs(m.mean - (i == j ? sigma * sigma / 2 : 0.0)) < 4 * m.se);
    }

  // Histogram of the d = 1 double well against quadrature cell masses.
  const auto dw = builtin(FieldKind::double_well, 1);
  const auto g = normalize(dw, 1.0);
  const std::size_t n = 2000;
  const Points s = sample(g, n, 11, 10.0, 10.0);
  const int bins = 20;
  const double lo = -2.5, hi = 2.5, w = (hi - lo) / bins;
  std::vector<double> count(bins, 0.0);
  for (const auto& p : s) {
    const int b = std::clamp(static_cast<int>(std::floor((p[0] - lo) / w)), 0, bins - 1);
    count[static_cast<std::size_t>(b)] += 1;
  }
  double chi2 = 0;
  for (int b = 0; b < bins; ++b) {
    const double a = b == 0 ? g.box().lo : lo + b * w;
    const double c = b == bins - 1 ? g.box().hi : lo + (b + 1) * w;
    const double expected = n * g.cell_mass(vec({a}), vec({c}));
    chi2 += (count[static_cast<std::size_t>(b)] - expected) * (count[static_cast<std::size_t>(b)] - expected) / expected;
  }
  const boost::math::chi_squared_distribution<double> dist(bins - 1);
  CHECK(boost::math::cdf(boost::math::complement(dist, chi2)) > 0.001);
}

TEST_CASE("occupation fraction of a cell matches its mass") {
  const auto dw = builtin(FieldKind::double_well, 2);
  const auto g = normalize(dw, 1.0);
  const GibbsSpec spec{dw, 1.0, {}};
  const Vec lo = vec({0.5, -0.5}), hi = vec({1.5, 0.5});
  const auto mc = mc_expect(spec, [&](const Vec& x) { return (x.array() >= lo.array()).all() && (x.array() <= hi.array()).all() ? 1.0 : 0.0; },
                            20000, 3);
  CHECK(std::abs(mc.estimate - g.cell_mass(lo, hi)) < 4 * mc.standard_error);
}

TEST_CASE("Monte Carlo expectations") {
  const GibbsSpec ou4{builtin(FieldKind::ou, 4), 1.0, {}};
  const auto c = mc_expect(ou4, [](const Vec&) { return 3.0; }, 100, 1);
  CHECK(c.estimate == 3.0);
  CHECK(c.standard_error == 0.0);
  const auto sq = mc_expect(ou4, [](const Vec& x) { return x.squaredNorm(); }, 20000, 2);
  CHECK(std::abs(sq.estimate - 2.0) < 4 * sq.standard_error);

  const auto dw = builtin(FieldKind::double_well, 2);
  const auto quad = normalize(dw, 1.0).expect([&](const Vec& x) { return lambda_plus(dw, x); });
  const auto mc = mc_expect(GibbsSpec{dw, 1.0, {}}, [&](const Vec& x) { return lambda_plus(dw, x); }, 20000, 5);
  CHECK(std::abs(mc.estimate - quad.value) < 3 * std::hypot(mc.standard_error, quad.error));
  CHECK_THROWS_AS(mc_expect(ou4, [](const Vec&) { return 1.0; }, 0, 1), DomainError);
}

TEST_CASE("Gauss-Legendre rule integrates polynomials exactly") {
  std::vector<double> x, w;
  gauss_legendre(8, x, w);
  for (int p = 0; p <= 15; ++p) {
    double s = 0;
    for (std::size_t i = 0; i < x.size(); ++i) s += w[i] * std::pow(x[i], p);
    CHECK(s == doctest::Approx(p % 2 ? 0.0 : 2.0 / (p + 1)).epsilon(1e-13));
  }
}
