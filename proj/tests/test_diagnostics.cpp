#include "doctest.h"
#include "rdsync/diagnostics.hpp"
#include "rdsync/error.hpp"

#include <algorithm>
#include <cmath>
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

DriftField constant_field() { return build_custom("constant", 2, {"1", "-2"}, std::nullopt, 0.0); }
DriftField zero_field() { return build_custom("zero", 2, {"0", "0"}, std::nullopt, 0.0); }

EnsembleOptions em(double dt = 1e-3) {
  EnsembleOptions o;
  o.integrator.scheme = Scheme::euler_maruyama;
  o.integrator.dt = dt;
  return o;
}

}  // namespace

TEST_CASE("ball mesh") {
  const auto m = ball_mesh(vec({1, 2}), 0.5, 32);
  CHECK(m.size() == 32);
  CHECK(m[0] == vec({1, 2}));
  int on_sphere = 0;
  for (const auto& p : m) {
    CHECK((p - vec({1, 2})).norm() <= 0.5 + 1e-12);
    on_sphere += std::abs((p - vec({1, 2})).norm() - 0.5) < 1e-12;
  }
  CHECK(on_sphere >= 16);
  CHECK(ball_mesh(vec({0, 0, 0}), 1.0, 1).size() == 1);
  CHECK(ball_mesh(vec({0}), 1.0, 3)[1] == vec({1}));
}

TEST_CASE("two-point synchronization") {
  const auto dw = builtin(FieldKind::double_well, 2);
  const auto same = two_point_sync(dw, 1.0, vec({0.3, 0.1}), vec({0.3, 0.1}), 1.0, 30, {0.5, 1.0}, 0.05);
  for (const auto& row : same.distance_quantiles) CHECK(row.max == 0.0);

  const auto frozen = two_point_sync(dw, 0.0, vec({1, 0}), vec({-1, 0}), 10.0, 30, {1, 5, 10}, 0.05);
  for (const auto& row : frozen.distance_quantiles) {
    CHECK(row.min == 2.0);
    CHECK(row.max == 2.0);
  }
  CHECK(frozen.exceed_prob.back() == 1.0);

  const auto r = two_point_sync(dw, 1.0, vec({1, 0}), vec({-1, 0}), 100.0, 200, {10, 50, 100}, 0.05);
  CHECK(r.exploded == 0);
  CHECK(r.distance_quantiles.back().q50 < 0.01);
  for (std::size_t c = 0; c < r.checkpoints.size(); ++c) {
    const auto& q = r.distance_quantiles[c];
    CHECK(q.min <= q.q05);
    CHECK(q.q05 <= q.q25);
    CHECK(q.q25 <= q.q50);
    CHECK(q.q50 <= q.q75);
    CHECK(q.q75 <= q.q95);
    CHECK(q.q95 <= q.max);
    CHECK(r.exceed_ci[c].lo <= r.exceed_prob[c]);
    CHECK(r.exceed_prob[c] <= r.exceed_ci[c].hi);
  }
  CHECK_THROWS_AS(two_point_sync(dw, 1.0, vec({1, 0}), vec({-1, 0}), 1.0, 3, {0.0105}, 0.05), WindowError);
}

TEST_CASE("reports do not depend on the worker count") {
  const auto dw = builtin(FieldKind::double_well, 2);
  EnsembleOptions one, four;
  four.workers = 4;
  const auto a = two_point_sync(dw, 1.0, vec({1, 0}), vec({-1, 0}), 5.0, 40, {1, 5}, 0.05, one);
  const auto b = two_point_sync(dw, 1.0, vec({1, 0}), vec({-1, 0}), 5.0, 40, {1, 5}, 0.05, four);
  CHECK(a.distances == b.distances);
}

TEST_CASE("quantiles are permutation invariant in seed order") {
  const auto dw = builtin(FieldKind::double_well, 2);
  const auto r = two_point_sync(dw, 1.0, vec({1, 0}), vec({-1, 0}), 2.0, 50, {2}, 0.05);
  auto d = r.distances[0];
  std::mt19937 rng(3);
  std::shuffle(d.begin(), d.end(), rng);
  CHECK(quantile(d, 0.25) == r.distance_quantiles[0].q25);
  CHECK(quantile(d, 0.95) == r.distance_quantiles[0].q95);
}

TEST_CASE("noise-induced stabilization trend in sigma") {
  const auto dw = builtin(FieldKind::double_well, 2);
  double previous = 1e9;
  for (double sigma : {0.5, 1.0, 2.0}) {
    const auto r = two_point_sync(dw, sigma, vec({1, 0}), vec({-1, 0}), 100.0, 200, {100}, 0.05);
    CHECK(r.distance_quantiles[0].q50 <= previous);
    previous = r.distance_quantiles[0].q50;
  }
}

TEST_CASE("ball diameter") {
  const auto ou = builtin(FieldKind::ou, 2);
  const auto det = ball_diameter(ou, 0.0, vec({0, 0}), 1.0, 16, 2.0, 1, {0, 2}, 0.05, em());
  CHECK(det.distance_quantiles[0].max == doctest::Approx(2.0));
  CHECK(std::abs(det.distance_quantiles[1].max - 2.0 * std::exp(-2.0)) < 2e-3);

  const auto single = ball_diameter(ou, 1.0, vec({0, 0}), 1.0, 1, 1.0, 5, {1}, 0.05);
  CHECK(single.distance_quantiles[0].max == 0.0);

  const auto dw = builtin(FieldKind::double_well, 2);
  const auto r = ball_diameter(dw, 1.0, vec({0, 0}), 1.5, 16, 100.0, 100, {50, 100}, 0.05);
  REQUIRE(r.final_fraction_below.has_value());
  CHECK(*r.final_fraction_below >= 0.5);
}

TEST_CASE("pullback ensembles") {
  const auto ou = builtin(FieldKind::ou, 2);
  const Points init{vec({3, 0}), vec({-2, 1}), vec({0, -4})};
  const auto pe = pullback_ensemble(ou, 1.0, 7, init, {0.0, 20.0});
  CHECK(pe.endpoints[0] == init);
  double diam = 0;
  for (const auto& a : pe.endpoints[1])
    for (const auto& b : pe.endpoints[1]) diam = std::max(diam, (a - b).norm());
  CHECK(diam < 1e-6);
  CHECK_THROWS_AS(pullback_ensemble(ou, 1.0, 7, init, {-1.0}), DomainError);
}

TEST_CASE("single-linkage clusters") {
  const Points same(10, vec({1, 1}));
  CHECK(cluster_count(same, 0.1).cluster_count == 1);

  Points circle;
  for (int i = 0; i < 20; ++i) circle.push_back(vec({0.01 * i}));
  for (int i = 0; i < 20; ++i) circle.push_back(vec({M_PI + 0.01 * i}));
  circle.push_back(vec({kTwoPi - 0.005}));  // joins the first group across the wrap
  const auto c = cluster_count(circle, 0.05, Metric::arc);
  CHECK(c.cluster_count == 2);
  CHECK(std::abs(std::abs(std::remainder(c.centers[0][0] - c.centers[1][0], kTwoPi)) - M_PI) < 0.1);
  CHECK(c.sizes[0] == 21);
  CHECK(cluster_count(circle, 0.05, Metric::euclidean).cluster_count == 3);

  // Permutation and duplicate invariance.
  Points shuffled = circle;
  std::mt19937 rng(5);
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  shuffled.push_back(shuffled.front());
  CHECK(cluster_count(shuffled, 0.05, Metric::arc).cluster_count == 2);

  const auto e = cluster_count({vec({0, 0}), vec({0.05, 0}), vec({1, 1})}, 0.1);
  CHECK(e.labels == std::vector<std::size_t>{0, 0, 1});
  CHECK(e.max_intra_cluster_diameter == doctest::Approx(0.05));
  CHECK((e.centers[0] - vec({0.025, 0})).norm() < 1e-15);
  CHECK(default_linkage_epsilon(1.0, 1e-4) == doctest::Approx(0.2));
}

TEST_CASE("one-sided Lipschitz check") {
  const auto ou = builtin(FieldKind::ou, 2);
  const auto r = check_one_sided_lipschitz(ou, Box{-3, 3}, 2000, 1);
  CHECK(std::abs(r.constants.at("lambda_hat") + 1.0) < 1e-12);
  CHECK(r.verdict == Verdict::satisfied_empirically);

  const auto dw = builtin(FieldKind::double_well, 1);
  const auto near0 = check_one_sided_lipschitz(dw, Box{-0.5, 0.5}, 20000, 2);
  CHECK(std::abs(near0.constants.at("lambda_hat") - 1.0) < 1e-3);
  CHECK(near0.verdict == Verdict::satisfied_empirically);

  // Declaring a constant that is too small yields a replayable witness.
  const auto lying = build_custom("lying", 1, {"x1 - x1^3"}, std::nullopt, 0.5);
  const auto v = check_one_sided_lipschitz(lying, Box{-1, 1}, 2000, 3);
  CHECK(v.verdict == Verdict::violated_with_witness);
  CHECK(replay_violation(lying, v));

  const auto vs = builtin(FieldKind::v_s);
  const auto a = check_one_sided_lipschitz(vs, Box{-4, 4}, 1000000, 4);
  const auto b = check_one_sided_lipschitz(vs, Box{-4, 4}, 1000000, 5);
  CHECK(std::isfinite(a.constants.at("lambda_hat")));
  CHECK(std::abs(a.constants.at("lambda_hat") - b.constants.at("lambda_hat")) < 0.05);
}

TEST_CASE("eventual monotonicity") {
  const auto ou = builtin(FieldKind::ou, 2);
  CHECK(check_eventual_monotone(ou, 1.0, 2000, 1).constants.at("lambda1_hat") == doctest::Approx(1.0).epsilon(1e-12));

  // Oracle: on the annulus |x|, |y| >= R the quotient of x - |x|^2 x is maximized by pairs
  // approaching a point on the inner sphere along a tangent direction, where it equals 1 - R^2.
  const auto dw = builtin(FieldKind::double_well, 2);
  const auto r = check_eventual_monotone(dw, 2.0, 20000, 2);
  CHECK(r.verdict == Verdict::satisfied_empirically);
  CHECK(std::abs(r.constants.at("lambda1_hat") - 3.0) < 0.1);

  const auto bad = check_eventual_monotone(dw, 0.5, 20000, 3);
  CHECK(bad.verdict == Verdict::violated_with_witness);
  CHECK(replay_violation(dw, bad));
}

TEST_CASE("monotone on large sets") {
  const auto ou = builtin(FieldKind::ou, 2);
  CHECK(check_monotone_on_large_sets(ou, 1.0, {vec({0, 0})}, 1000, 1).verdict == Verdict::satisfied_empirically);
  const auto dw = builtin(FieldKind::double_well, 2);
  const auto r = check_monotone_on_large_sets(dw, 1.0, {vec({0, 0}), vec({1, 0}), vec({4, 0})}, 5000, 2);
  CHECK(r.verdict == Verdict::satisfied_empirically);
  CHECK(r.witness[0] == vec({4, 0}));
  CHECK(check_monotone_on_large_sets(constant_field(), 1.0, {vec({0, 0}), vec({5, 5})}, 1000, 3).verdict ==
        Verdict::inconclusive);
}

TEST_CASE("gradient direction search") {
  const auto ou = builtin(FieldKind::ou, 2);
  const auto r = gradient_direction_search(ou, vec({1, 1}), {vec({0, 0})});
  CHECK(r.verdict == Verdict::satisfied_empirically);
  CHECK(r.constants.at("value") == doctest::Approx(-2.0));
  const auto dw = builtin(FieldKind::double_well, 1);
  const auto s = gradient_direction_search(dw, vec({2}), {vec({3})});
  CHECK(s.witness[0] == vec({3}));
  CHECK(s.constants.at("value") == doctest::Approx(-48.0));
  // The first grid point with a negative value wins: (b(0) - b(-2)) * 2 = -12.
  const auto first = gradient_direction_search(dw, vec({2}), {vec({0}), vec({1}), vec({3})});
  CHECK(first.witness[0] == vec({0}));
  CHECK(first.constants.at("value") == doctest::Approx(-12.0));
  CHECK(gradient_direction_search(constant_field(), vec({1, 0}), {vec({0, 0}), vec({2, 2})}).verdict ==
        Verdict::inconclusive);
  CHECK_THROWS_AS(gradient_direction_search(ou, vec({0, 0}), {vec({0, 0})}), DomainError);
}

TEST_CASE("swift control") {
  // b = 0: f(t) = (t/t0) z / sigma and the controlled endpoint is exact.
  const auto zero = zero_field();
  SwiftControlOptions o;
  const auto r = swift_control(zero, 2.0, vec({0, 0}), 0.5, vec({1, 1}), 0.5, 0.1, o);
  for (std::size_t i = 0; i < r.times.size(); ++i)
    CHECK((r.control[i] - (r.times[i] / 0.5) * vec({1, 1}) / 2.0).norm() < 1e-12);
  CHECK(r.residual < 1e-12);

  // OU: the controlled ODE solved in closed form by the EM recursion has O(dt) error.
  const auto ou = builtin(FieldKind::ou, 2);
  const auto q = swift_control(ou, 1.0, vec({0, 0}), 0.1, vec({1, 0}), 0.0, 0.1, o);
  CHECK(q.residual < 5 * q.dt);

  const auto dw = builtin(FieldKind::double_well, 2);
  const auto w = swift_control(dw, 1.0, vec({-1, 0}), 0.1, vec({2, 0}), 0.0, 0.1, o);
  CHECK(w.mesh.size() == 32);
  CHECK(w.all_within_delta);
  CHECK_THROWS_AS(swift_control(dw, 1.0, vec({-1, 0}), 0.1, vec({2, 0}), 1.0, 0.1, o), DomainError);
}

TEST_CASE("contraction witness") {
  const auto ou = builtin(FieldKind::ou, 2);
  const auto r = contraction_witness(ou, 1.0, 1.0, vec({0, 0}), 1.0);
  CHECK(r.T0 >= std::log(9.0));
  CHECK(r.ratio <= 1.0 / 9.0 + 1e-3);
  CHECK(r.satisfied);

  const auto dw = builtin(FieldKind::double_well, 2);
  const auto w = contraction_witness(dw, 1.0, 1.0, vec({4, 0}), 0.0);
  CHECK(w.c > 0.0);
  CHECK(w.ratio <= 0.25);

  ContractionOptions one;
  one.mesh_n = 1;
  CHECK(contraction_witness(dw, 1.0, 1.0, vec({4, 0}), 0.0, one).ratio == 0.0);
}
