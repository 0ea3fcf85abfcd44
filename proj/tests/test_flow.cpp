#include "doctest.h"
#include "rdsync/error.hpp"
#include "rdsync/flow.hpp"
#include "rdsync/noise.hpp"

#include <cmath>
#include <cstring>
#include <random>

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

IntegratorSpec spec(Scheme s, double dt) {
  IntegratorSpec is;
  is.scheme = s;
  is.dt = dt;
  return is;
}

bool bitwise_equal(const Vec& a, const Vec& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) == 0;
}

const Scheme kSchemes[] = {Scheme::euler_maruyama, Scheme::tamed_euler, Scheme::split_step_implicit};

}  // namespace

TEST_CASE("single steps") {
  const auto ou = builtin(FieldKind::ou, 1);
  const Vec zero = Vec::Zero(1);
  CHECK(step(ou, spec(Scheme::euler_maruyama, 0.1), 0.0, vec({1}), zero)[0] == doctest::Approx(0.9).epsilon(1e-15));
  CHECK(step(ou, spec(Scheme::split_step_implicit, 0.1), 0.0, vec({1}), zero)[0] ==
        doctest::Approx(1.0 / 1.1).epsilon(1e-12));
  CHECK(step(ou, spec(Scheme::tamed_euler, 0.1), 0.0, vec({1}), zero)[0] ==
        doctest::Approx(1.0 - 0.1 / 1.1).epsilon(1e-15));

  const auto dw = builtin(FieldKind::double_well, 1);
  for (Scheme s : kSchemes) CHECK(step(dw, spec(s, 0.1), 0.0, vec({1}), zero)[0] == doctest::Approx(1.0).epsilon(1e-12));

  // Additive noise enters linearly.
  CHECK(step(ou, spec(Scheme::euler_maruyama, 0.1), 2.0, vec({1}), vec({0.25}))[0] ==
        doctest::Approx(1.4).epsilon(1e-15));
}

TEST_CASE("Newton failure and bad arguments") {
  const auto dw = builtin(FieldKind::double_well, 1);
  IntegratorSpec s = spec(Scheme::split_step_implicit, 0.1);
  s.newton_max_iter = 1;
  CHECK_THROWS_AS(step(dw, s, 0.0, vec({0.5}), Vec::Zero(1)), ConvergenceError);
  CHECK_THROWS_AS(step(dw, spec(Scheme::euler_maruyama, 0.0), 0.0, vec({0.5}), Vec::Zero(1)), DomainError);
  CHECK_THROWS_AS(parse_scheme("rk4"), ConfigError);
  CHECK(parse_scheme("tamed") == Scheme::tamed_euler);

  const auto p = sample_path(1, 1, 0.01, 0.0, 1.0);
  CHECK_THROWS_AS(evolve(dw, spec(Scheme::euler_maruyama, 0.02), 1.0, p, vec({0}), 0.0, 1.0), DomainError);
  CHECK_THROWS_AS(evolve(dw, spec(Scheme::euler_maruyama, 0.01), 1.0, p, vec({0}), 0.0, 2.0), WindowError);
  CHECK_THROWS_AS(evolve(builtin(FieldKind::ou, 2), spec(Scheme::euler_maruyama, 0.01), 1.0, p, vec({0, 0}), 0.0, 1.0),
                  DomainError);
}

TEST_CASE("deterministic OU: accuracy and first-order convergence") {
  const auto ou = builtin(FieldKind::ou, 1);
  auto err = [&](double dt) {
    const auto p = sample_path(0, 1, dt, 0.0, 1.0);
    return std::abs(evolve(ou, spec(Scheme::euler_maruyama, dt), 0.0, p, vec({1}), 0.0, 1.0, 0).end()[0] - std::exp(-1.0));
  };
  CHECK(err(1e-3) < 2e-3);
  const double e1 = err(0.01), e2 = err(0.005), e3 = err(0.0025);
  CHECK(std::log2(e1 / e2) >= 0.9);
  CHECK(std::log2(e2 / e3) >= 0.9);
}

TEST_CASE("trajectory recording") {
  const auto ou = builtin(FieldKind::ou, 2);
  const auto p = sample_path(3, 2, 0.01, 0.0, 1.0);
  const auto tr = evolve(ou, spec(Scheme::tamed_euler, 0.01), 1.0, p, vec({1, 1}), 0.0, 1.0, 10);
  CHECK(tr.times.size() == 11);
  CHECK(tr.times.front() == 0.0);
  CHECK(tr.times.back() == doctest::Approx(1.0));
  CHECK(tr.states.size() == tr.times.size());
  CHECK_FALSE(tr.exploded);
}

TEST_CASE("cocycle identity is bitwise") {
  std::mt19937_64 rng(17);
  const FieldKind kinds[] = {FieldKind::ou, FieldKind::double_well, FieldKind::v_e};
  for (int rep = 0; rep < 60; ++rep) {
    const FieldKind k = kinds[rep % 3];
    const auto f = builtin(k, k == FieldKind::v_e ? 2 : 1 + rep % 3);
    const Scheme s = kSchemes[(rep / 3) % 3];
    const double dt = 0.01;
    const auto p = sample_path(rng(), f.noise_dim(), dt, -5.0, 5.0);
    const std::int64_t ns = 1 + static_cast<std::int64_t>(rng() % 200), nt = 1 + static_cast<std::int64_t>(rng() % 200);
    const double s_time = ns * dt, t_time = nt * dt;
    const Vec x0 = Vec::Constant(f.dim(), 0.3);
    const Vec direct = evolve(f, spec(s, dt), 1.0, p, x0, 0.0, s_time + t_time, 0).end();
    const Vec mid = evolve(f, spec(s, dt), 1.0, p, x0, 0.0, s_time, 0).end();
    const Vec split = evolve(f, spec(s, dt), 1.0, p.shift_steps(ns), mid, 0.0, t_time, 0).end();
    CHECK(bitwise_equal(direct, split));
  }
}

TEST_CASE("ensembles share the path") {
  const auto dw = builtin(FieldKind::double_well, 2);
  const auto p = sample_path(5, 2, 1e-3, 0.0, 2.0);
  const Points x0{vec({0.1, 0.2}), vec({-1.5, 0.3}), vec({2, 2})};
  const auto e = evolve_ensemble(dw, spec(Scheme::tamed_euler, 1e-3), 1.0, p, x0, 0.0, 2.0);
  for (std::size_t i = 0; i < x0.size(); ++i)
    CHECK(bitwise_equal(e.endpoints[i], evolve(dw, spec(Scheme::tamed_euler, 1e-3), 1.0, p, x0[i], 0.0, 2.0, 0).end()));

  const auto ou = builtin(FieldKind::ou, 2);
  const Vec x = vec({1, 0}), y = vec({0, 2});
  for (std::uint64_t seed : {1ULL, 2ULL}) {
    const auto q = sample_path(seed, 2, 1e-3, 0.0, 3.0);
    const auto end = evolve_ensemble(ou, spec(Scheme::euler_maruyama, 1e-3), 1.0, q, {x, y}, 0.0, 3.0);
    CHECK(((end.endpoints[0] - end.endpoints[1]) - (x - y) * std::exp(-3.0)).norm() < 2e-3);
  }
}

TEST_CASE("shared-noise cancellation: differences do not depend on the path") {
  // The difference process of two EM members with additive noise solves the noise-free
  // recursion; across paths it agrees up to the rounding of adding sigma dW to each member.
  const auto ou = builtin(FieldKind::ou, 2);
  const Vec x = vec({0.5, 0.1}), y = vec({0.5, 0.1 + 1e-6});
  Vec diffs[2];
  for (int i = 0; i < 2; ++i) {
    const auto q = sample_path(100 + i, 2, 1e-3, 0.0, 1.0);
    const auto end = evolve_ensemble(ou, spec(Scheme::euler_maruyama, 1e-3), 1.0, q, {x, y}, 0.0, 1.0);
    diffs[i] = end.endpoints[0] - end.endpoints[1];
  }
  CHECK((diffs[0] - diffs[1]).norm() < 1e-12);
}

TEST_CASE("double well: tamed and split-step do not explode") {
  const auto dw = builtin(FieldKind::double_well, 2);
  for (Scheme s : {Scheme::tamed_euler, Scheme::split_step_implicit}) {
    int exploded = 0;
    for (std::uint64_t i = 0; i < 100; ++i) {
      const auto p = WienerPath(member_seed(1, i), 2, 1e-3, 0, 100000);
      exploded += evolve(dw, spec(s, 1e-3), 1.0, p, vec({1, 0}), 0.0, 100.0, 0).exploded;
    }
    CHECK(exploded == 0);
  }
}

TEST_CASE("double well: a circle of starts collapses") {
  const auto dw = builtin(FieldKind::double_well, 2);
  Points x0;
  for (int i = 0; i < 8; ++i) x0.push_back(vec({std::cos(kTwoPi * i / 8), std::sin(kTwoPi * i / 8)}));
  int collapsed = 0;
  for (std::uint64_t i = 0; i < 100; ++i) {
    const auto p = WienerPath(member_seed(2, i), 2, 1e-3, 0, 50000);
    const auto e = evolve_ensemble(dw, spec(Scheme::tamed_euler, 1e-3), 1.0, p, x0, 0.0, 50.0);
    double diam = 0;
    for (const auto& a : e.endpoints)
      for (const auto& b : e.endpoints) diam = std::max(diam, (a - b).norm());
    collapsed += diam < 0.1;
  }
  CHECK(collapsed >= 90);
}

TEST_CASE("explosion is flagged and the state frozen") {
  const auto f = build_custom("blowup", 1, {"x1^2"}, std::nullopt, std::nullopt);
  const auto p = sample_path(1, 1, 0.01, 0.0, 10.0);
  const auto tr = evolve(f, spec(Scheme::euler_maruyama, 0.01), 0.0, p, vec({1}), 0.0, 10.0);
  CHECK(tr.exploded);
  REQUIRE(tr.explosion_time.has_value());
  CHECK(*tr.explosion_time < 1.5);
  CHECK(tr.states.back().allFinite());
  CHECK(tr.states.back()[0] <= kExplosionNorm);
}

TEST_CASE("tangent flow: OU rate and orthonormality") {
  const auto ou = builtin(FieldKind::ou, 3);
  const double dt = 1e-3;
  const auto p = sample_path(9, 3, dt, 0.0, 50.0);
  const auto [tr, frame] = tangent_evolve(ou, spec(Scheme::euler_maruyama, dt), 1.0, p, vec({1, 2, 3}), 3, 0.0, 50.0, 10, 0);
  for (int i = 0; i < 3; ++i) CHECK(frame.log_r[i] / 50.0 == doctest::Approx(std::log(1.0 - dt) / dt).epsilon(1e-9));
  CHECK(frame.max_orthonormality_error < 1e-10);
  CHECK(((frame.frame.transpose() * frame.frame) - Mat::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(frame.qr_count == 5000);
}

TEST_CASE("tangent flow in d = 1 is the product of one-step derivatives") {
  const auto dw = builtin(FieldKind::double_well, 1);
  const double dt = 1e-3, T = 20.0;
  const auto p = sample_path(4, 1, dt, 0.0, T);
  const auto [tr, frame] = tangent_evolve(dw, spec(Scheme::euler_maruyama, dt), 1.0, p, vec({0.3}), 1, 0.0, T, 7);
  double discrete = 0, continuous = 0, bound = 0;
  for (std::size_t i = 0; i + 1 < tr.states.size(); ++i) {
    const double x = tr.states[i][0], bp = 1.0 - 3.0 * x * x;
    discrete += std::log(std::abs(1.0 + dt * bp));
    continuous += bp * dt;
    bound += (dt * bp) * (dt * bp);
  }
  const double rate = frame.log_r[0] / T;
  CHECK(std::abs(rate - discrete / T) < 1e-8);
  // |log(1+u) - u| <= u^2 for |u| <= 1/2.
  CHECK(std::abs(rate - continuous / T) <= bound / T);
}

TEST_CASE("Gronwall bound on the tangent flow") {
  // For lambda = 1 (double well) the k = d frame volume grows at most like e^{d (lambda + eps) t}.
  const auto dw = builtin(FieldKind::double_well, 2);
  for (double dt : {1e-2, 5e-3}) {
    const auto p = sample_path(12, 2, dt, 0.0, 5.0);
    for (Scheme s : {Scheme::euler_maruyama, Scheme::split_step_implicit}) {
      const auto [tr, frame] = tangent_evolve(dw, spec(s, dt), 1.0, p, vec({0.05, 0.0}), 2, 0.0, 5.0, 1, 0);
      CHECK(frame.log_r[0] <= 5.0 * (1.0 + 2.0 * dt));
      CHECK(frame.log_r.sum() <= 2 * 5.0 * (1.0 + 2.0 * dt));
    }
  }
}

TEST_CASE("pullback evaluation") {
  const auto ou = builtin(FieldKind::ou, 1);
  const IntegratorSpec is = spec(Scheme::euler_maruyama, 1e-2);
  const auto p = sample_path(8, 1, 1e-2, -20.0, 0.0);
  CHECK(bitwise_equal(pullback_evolve(ou, is, 1.0, p, vec({0.7}), 0.0), vec({0.7})));
  CHECK(bitwise_equal(pullback_evolve(ou, is, 1.0, p, vec({0.7}), 5.0), evolve(ou, is, 1.0, p, vec({0.7}), -5.0, 0.0).end()));
  CHECK_THROWS_AS(pullback_evolve(ou, is, 1.0, p, vec({0.7}), 30.0), WindowError);

  int converging = 0;
  for (std::uint64_t i = 0; i < 200; ++i) {
    const auto q = sample_path(member_seed(3, i), 1, 1e-2, -20.0, 0.0);
    const double p5 = pullback_evolve(ou, is, 1.0, q, vec({3.0}), 5.0)[0];
    const double p10 = pullback_evolve(ou, is, 1.0, q, vec({3.0}), 10.0)[0];
    const double p20 = pullback_evolve(ou, is, 1.0, q, vec({3.0}), 20.0)[0];
    converging += std::abs(p10 - p20) < std::abs(p5 - p10);
  }
  CHECK(converging >= 160);
}

TEST_CASE("circle chart wraps into [0, 2pi)") {
  const auto c = builtin(FieldKind::circle_stratonovich);
  const auto p = sample_path(2, 2, 1e-3, 0.0, 5.0);
  const auto tr = evolve(c, spec(Scheme::euler_maruyama, 1e-3), 1.0, p, vec({6.2}), 0.0, 5.0, 10);
  for (const auto& s : tr.states) {
    CHECK(s[0] >= 0.0);
    CHECK(s[0] < kTwoPi);
  }
}
