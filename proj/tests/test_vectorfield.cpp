#include "doctest.h"
#include "rdsync/error.hpp"
#include "rdsync/vectorfield.hpp"

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

Points uniform_points(int d, int n, double half, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-half, half);
  Points pts;
  for (int i = 0; i < n; ++i) {
    Vec x(d);
    for (int j = 0; j < d; ++j) x[j] = u(rng);
    pts.push_back(x);
  }
  return pts;
}

// Independent central-difference gradient of V (test-side oracle).
Vec fd_grad(const DriftField& f, const Vec& x, double h) {
  Vec g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Vec p = x, m = x;
    p[i] += h;
    m[i] -= h;
    g[i] = (f.potential(p) - f.potential(m)) / (2 * h);
  }
  return g;
}

const FieldKind kGradientKinds[] = {FieldKind::ou, FieldKind::double_well, FieldKind::v_e, FieldKind::v_s};

}  // namespace

TEST_CASE("builtin drifts at known points") {
  const auto ou3 = builtin(FieldKind::ou, 3);
  for (const auto& x : uniform_points(3, 20, 5.0, 1)) CHECK((eval_drift(ou3, x) + x).norm() == 0.0);
  CHECK(eval_drift(builtin(FieldKind::ou, 2), vec({2, 0})) == vec({-2, 0}));

  const auto dw2 = builtin(FieldKind::double_well, 2);
  CHECK(eval_drift(dw2, vec({1, 0})).norm() == 0.0);
  CHECK(eval_drift(dw2, vec({2, 0})) == vec({-6, 0}));
  CHECK(eval_drift(dw2, vec({0, 0})).norm() == 0.0);

  CHECK(builtin(FieldKind::v_e).potential(vec({0, 0})) == 0.0);
  CHECK(builtin(FieldKind::v_s).potential(vec({0, 0})) == 0.0);
}

TEST_CASE("double-well potential and derivatives match the closed forms") {
  for (int d : {1, 2, 3}) {
    const auto f = builtin(FieldKind::double_well, d);
    for (const auto& x : uniform_points(d, 50, 2.0, 2)) {
      const double s = x.squaredNorm();
      CHECK(f.potential(x) == doctest::Approx(0.25 * s * s - 0.5 * s).epsilon(1e-14));
      const Mat expected = (1.0 - s) * Mat::Identity(d, d) - 2.0 * x * x.transpose();
      CHECK((eval_jacobian(f, x) - expected).cwiseAbs().maxCoeff() < 1e-14);
    }
  }
  CHECK(eval_jacobian(builtin(FieldKind::double_well, 1), vec({0}))(0, 0) == 1.0);
}

TEST_CASE("double-well unit sphere is invariant") {
  for (int d : {1, 2, 3, 5}) {
    const auto f = builtin(FieldKind::double_well, d);
    for (auto x : uniform_points(d, 100, 1.0, 3)) {
      x.normalize();
      CHECK(eval_drift(f, x).norm() < 1e-12);
    }
  }
}

TEST_CASE("gradient consistency, symmetry and eigenvalue ordering") {
  for (FieldKind k : kGradientKinds) {
    const int d = (k == FieldKind::v_e || k == FieldKind::v_s) ? 2 : 3;
    const auto f = builtin(k, d);
    CAPTURE(to_string(k));
    double grad = 0, asym = 0, hess = 0;
    for (const auto& x : uniform_points(d, 1000, 3.0, 4)) {
      grad = std::max(grad, (eval_drift(f, x) + fd_grad(f, x, kFdStep)).cwiseAbs().maxCoeff());
      const Mat j = eval_jacobian(f, x);
      asym = std::max(asym, (j - j.transpose()).cwiseAbs().maxCoeff());
      hess = std::max(hess, (j + f.hessian(x)).cwiseAbs().maxCoeff());
      CHECK(lambda_minus(f, x) <= lambda_plus(f, x));
    }
    CHECK(grad < 1e-4);
    CHECK(asym < 1e-12);
    CHECK(hess < 1e-12);

    const auto c = check_consistency(f, 200, 3.0, 9);
    CHECK(c.max_gradient_mismatch < 1e-4);
    CHECK(c.max_jacobian_asymmetry < 1e-12);
    CHECK(c.min_eigen_gap >= 0.0);
  }
}

TEST_CASE("v_s drift matches -grad V by central differences") {
  const auto f = builtin(FieldKind::v_s);
  for (const auto& x : uniform_points(2, 200, 4.0, 5)) CHECK((eval_drift(f, x) + fd_grad(f, x, 1e-5)).norm() < 1e-6);
}

TEST_CASE("analytic Jacobians agree with finite differences") {
  for (FieldKind k : {FieldKind::v_e, FieldKind::v_s}) {
    const auto f = builtin(k);
    double worst = 0;
    for (const auto& x : uniform_points(2, 100, 3.0, 6)) {
      Mat fd(2, 2);
      for (int j = 0; j < 2; ++j) {
        Vec p = x, m = x;
        p[j] += 1e-5;
        m[j] -= 1e-5;
        fd.col(j) = (eval_drift(f, p) - eval_drift(f, m)) / 2e-5;
      }
      worst = std::max(worst, (fd - eval_jacobian(f, x)).cwiseAbs().maxCoeff());
    }
    CHECK(worst < 1e-5);
  }
}

TEST_CASE("lambda_plus of simple fields") {
  for (const auto& x : uniform_points(3, 20, 3.0, 7)) {
    CHECK(lambda_plus(builtin(FieldKind::ou, 3), x) == doctest::Approx(-1.0).epsilon(1e-14));
    CHECK(lambda_minus(builtin(FieldKind::ou, 3), x) == doctest::Approx(-1.0).epsilon(1e-14));
  }
  CHECK(lambda_plus(builtin(FieldKind::double_well, 1), vec({0})) == 1.0);

  BuiltinSpec lin;
  lin.kind = FieldKind::linear;
  lin.matrix = Mat::Zero(2, 2);
  lin.matrix.diagonal() << -1, -2;
  const auto f = build(lin);
  CHECK(f.is_gradient());
  for (const auto& x : uniform_points(2, 20, 3.0, 8)) {
    CHECK(lambda_plus(f, x) == doctest::Approx(-1.0));
    CHECK(lambda_minus(f, x) == doctest::Approx(-2.0));
  }
  CHECK(*f.one_sided_constant() == doctest::Approx(-1.0));
}

TEST_CASE("symmetric eigenvalues against a dense solver") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n01;
  for (int d : {1, 2, 3, 4}) {
    for (int rep = 0; rep < 20; ++rep) {
      Mat m(d, d);
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) m(i, j) = n01(rng);
      const Mat s = 0.5 * (m + m.transpose());
      Eigen::SelfAdjointEigenSolver<Mat> es(s);
      CHECK(max_symmetric_eigenvalue(m) == doctest::Approx(es.eigenvalues().maxCoeff()).epsilon(1e-12));
      CHECK(min_symmetric_eigenvalue(m) == doctest::Approx(es.eigenvalues().minCoeff()).epsilon(1e-12));
    }
  }
}

TEST_CASE("non-symmetric linear field has no potential") {
  BuiltinSpec lin;
  lin.kind = FieldKind::linear;
  lin.matrix = Mat(2, 2);
  lin.matrix << -1, 3, 0, -1;
  const auto f = build(lin);
  CHECK_FALSE(f.is_gradient());
  CHECK(*f.one_sided_constant() == doctest::Approx(0.5));
  CHECK_THROWS_AS(f.potential(vec({0, 0})), DomainError);
}

TEST_CASE("radial polynomial reproduces the double well") {
  BuiltinSpec r;
  r.kind = FieldKind::radial_polynomial;
  r.dim = 2;
  r.coefficients = {0.0, -0.5, 0.25};
  const auto f = build(r);
  const auto dw = builtin(FieldKind::double_well, 2);
  for (const auto& x : uniform_points(2, 50, 2.5, 10)) {
    CHECK((eval_drift(f, x) - eval_drift(dw, x)).norm() < 1e-12);
    CHECK((eval_jacobian(f, x) - eval_jacobian(dw, x)).norm() < 1e-12);
    CHECK(f.potential(x) == doctest::Approx(dw.potential(x)).epsilon(1e-13));
  }
}

TEST_CASE("circle field: Ito correction computed, not assumed") {
  const auto circle = builtin(FieldKind::circle_stratonovich);
  CHECK(circle.dim() == 1);
  CHECK(circle.noise_dim() == 2);
  CHECK(circle.periodic());
  for (int i = 0; i < 50; ++i) CHECK(std::abs(circle.stratonovich_correction(vec({0.1 * i}))[0]) < 1e-9);

  // g(a) = sin a: correction 1/2 g g' = 1/2 sin a cos a.
  DriftField::Parts p;
  p.name = "sin-noise";
  p.dim = 1;
  p.noise_dim = 1;
  p.periodic = true;
  p.drift = [](const Vec&, Vec& out) { out.setZero(); };
  p.jacobian = [](const Vec&, Mat& out) { out.setZero(); };
  p.diffusion = [](const Vec& x, Mat& out) { out(0, 0) = std::sin(x[0]); };
  const DriftField f(p);
  for (double a : {0.3, 1.0, 2.5, 4.0})
    CHECK(f.stratonovich_correction(vec({a}))[0] == doctest::Approx(0.5 * std::sin(a) * std::cos(a)).epsilon(1e-8));
}

TEST_CASE("custom fields from expressions") {
  const auto f = build_custom("cubic", 1, {"x1 - x1^3"}, std::nullopt, 1.0);
  const auto dw = builtin(FieldKind::double_well, 1);
  for (double x : {-2.0, -0.3, 0.0, 0.7, 1.9}) {
    CHECK(eval_drift(f, vec({x}))[0] == doctest::Approx(eval_drift(dw, vec({x}))[0]).epsilon(1e-14));
    CHECK(eval_jacobian(f, vec({x}))(0, 0) == doctest::Approx(1 - 3 * x * x).epsilon(1e-6));
  }
  const auto g = build_custom("bowl", 2, {}, std::string("0.5*(x1^2 + x2^2)"), std::nullopt);
  CHECK(g.is_gradient());
  CHECK((eval_drift(g, vec({1.0, -2.0})) - vec({-1.0, 2.0})).norm() < 1e-8);
  CHECK_THROWS_AS(build_custom("bad", 2, {"x1"}, std::nullopt, std::nullopt), ConfigError);
}

TEST_CASE("errors") {
  CHECK_THROWS_AS(parse_field_kind("lorenz"), ConfigError);
  CHECK(parse_field_kind("v_e") == FieldKind::v_e);
  CHECK_THROWS_AS(builtin(FieldKind::v_e, 3), ConfigError);
  BuiltinSpec r;
  r.kind = FieldKind::radial_polynomial;
  CHECK_THROWS_AS(build(r), ConfigError);
  const auto ou = builtin(FieldKind::ou, 2);
  CHECK_THROWS_AS(eval_drift(ou, vec({1, 2, 3})), DomainError);
  CHECK_THROWS_AS(eval_drift(ou, vec({NAN, 0})), NumericRangeError);
  CHECK_THROWS_AS(eval_drift(builtin(FieldKind::double_well, 1), vec({1e200})), NumericRangeError);
}
