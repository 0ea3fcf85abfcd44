#include "rdsync/vectorfield.hpp"

#include "rdsync/error.hpp"
#include "rdsync/expression.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <random>

namespace rdsync {

namespace {

bool all_finite(const Vec& v) { return v.allFinite(); }

void require_finite_input(const DriftField& f, const Vec& x) {
  if (x.size() != f.dim())
    throw DomainError(f.name() + ": point has dimension " + std::to_string(x.size()) + ", expected " +
                      std::to_string(f.dim()));
  if (!all_finite(x)) throw NumericRangeError(f.name() + ": non-finite input point");
}

// V(x) = a(x)|x|^2 with a(x) = base - sum_i c_i exp(-|x - p_i|^2).
struct BumpPotential {
  double base;
  std::vector<std::pair<double, Eigen::Vector2d>> bumps;

  struct Terms {
    double a;
    Eigen::Vector2d grad_a;
    Eigen::Matrix2d hess_a;
  };

  Terms terms(const Vec& x, bool with_hessian) const {
    Terms t{base, Eigen::Vector2d::Zero(), Eigen::Matrix2d::Zero()};
    for (const auto& [c, p] : bumps) {
      const Eigen::Vector2d u(x[0] - p[0], x[1] - p[1]);
      const double e = c * std::exp(-u.squaredNorm());
      t.a -= e;
      t.grad_a += 2.0 * e * u;
      if (with_hessian) t.hess_a += e * (2.0 * Eigen::Matrix2d::Identity() - 4.0 * u * u.transpose());
    }
    return t;
  }

  double value(const Vec& x) const { return terms(x, false).a * x.squaredNorm(); }

  void gradient(const Vec& x, Vec& g) const {
    const Terms t = terms(x, false);
    const Eigen::Vector2d xv(x[0], x[1]);
    const Eigen::Vector2d v = t.grad_a * xv.squaredNorm() + 2.0 * t.a * xv;
    g[0] = v[0];
    g[1] = v[1];
  }

  void hessian(const Vec& x, Mat& h) const {
    const Terms t = terms(x, true);
    const Eigen::Vector2d xv(x[0], x[1]);
    const Eigen::Matrix2d cross = t.grad_a * xv.transpose();
    const Eigen::Matrix2d m = t.hess_a * xv.squaredNorm() + 2.0 * (cross + cross.transpose()) +
                              2.0 * t.a * Eigen::Matrix2d::Identity();
    h = m;
  }
};

DriftField bump_field(std::string name, BumpPotential pot) {
  auto p = std::make_shared<const BumpPotential>(std::move(pot));
  DriftField::Parts parts;
  parts.name = std::move(name);
  parts.dim = 2;
  parts.drift = [p](const Vec& x, Vec& out) {
    p->gradient(x, out);
    out = -out;
  };
  parts.jacobian = [p](const Vec& x, Mat& out) {
    p->hessian(x, out);
    out = -out;
  };
  parts.potential = [p](const Vec& x) { return p->value(x); };
  parts.hessian = [p](const Vec& x, Mat& out) { p->hessian(x, out); };
  return DriftField(std::move(parts));
}

double poly(const std::vector<double>& c, double s) {
  double acc = 0.0;
  for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * s + *it;
  return acc;
}

std::vector<double> derivative(const std::vector<double>& c) {
  std::vector<double> d;
  for (std::size_t i = 1; i < c.size(); ++i) d.push_back(static_cast<double>(i) * c[i]);
  return d;
}

DriftField radial_field(std::string name, int dim, std::vector<double> g) {
  auto g0 = std::make_shared<const std::vector<double>>(g);
  auto g1 = std::make_shared<const std::vector<double>>(derivative(g));
  auto g2 = std::make_shared<const std::vector<double>>(derivative(*g1));
  DriftField::Parts parts;
  parts.name = std::move(name);
  parts.dim = dim;
  parts.drift = [g1](const Vec& x, Vec& out) { out = (-2.0 * poly(*g1, x.squaredNorm())) * x; };
  parts.jacobian = [g1, g2](const Vec& x, Mat& out) {
    const double s = x.squaredNorm();
    out = (-4.0 * poly(*g2, s)) * (x * x.transpose());
    out.diagonal().array() -= 2.0 * poly(*g1, s);
  };
  parts.potential = [g0](const Vec& x) { return poly(*g0, x.squaredNorm()); };
  parts.hessian = [g1, g2](const Vec& x, Mat& out) {
    const double s = x.squaredNorm();
    out = (4.0 * poly(*g2, s)) * (x * x.transpose());
    out.diagonal().array() += 2.0 * poly(*g1, s);
  };
  return DriftField(std::move(parts));
}

}  // namespace

DriftField::DriftField(Parts parts) {
  if (parts.dim < 1) throw DomainError("field '" + parts.name + "': dimension must be positive");
  if (!parts.drift) throw DomainError("field '" + parts.name + "': missing drift");
  if (parts.hessian && !parts.potential)
    throw DomainError("field '" + parts.name + "': hessian given without potential");
  if (parts.noise_dim != 0 && !parts.diffusion)
    throw DomainError("field '" + parts.name + "': non-additive noise requires diffusion columns");
  parts_ = std::make_shared<const Parts>(std::move(parts));
}

void DriftField::jacobian_into(const Vec& x, Mat& out) const {
  if (parts_->jacobian) {
    parts_->jacobian(x, out);
  } else {
    out = fd_jacobian(x);
  }
}

Vec DriftField::drift(const Vec& x) const {
  require_finite_input(*this, x);
  Vec out(dim());
  drift_into(x, out);
  if (!all_finite(out)) throw NumericRangeError(name() + ": drift overflow (non-finite value)");
  return out;
}

Mat DriftField::jacobian(const Vec& x) const {
  require_finite_input(*this, x);
  Mat out(dim(), dim());
  jacobian_into(x, out);
  if (!out.allFinite()) throw NumericRangeError(name() + ": jacobian overflow (non-finite value)");
  return out;
}

Mat DriftField::fd_jacobian(const Vec& x, double h) const {
  const int d = dim();
  Mat out(d, d);
  Vec xp = x, xm = x, fp(d), fm(d);
  for (int j = 0; j < d; ++j) {
    xp[j] = x[j] + h;
    xm[j] = x[j] - h;
    drift_into(xp, fp);
    drift_into(xm, fm);
    out.col(j) = (fp - fm) / (2.0 * h);
    xp[j] = x[j];
    xm[j] = x[j];
  }
  return out;
}

double DriftField::potential(const Vec& x) const {
  if (!is_gradient()) throw DomainError(name() + ": field has no potential");
  require_finite_input(*this, x);
  return parts_->potential(x);
}

Mat DriftField::hessian(const Vec& x) const {
  if (!is_gradient()) throw DomainError(name() + ": field has no potential");
  require_finite_input(*this, x);
  if (parts_->hessian) {
    Mat out(dim(), dim());
    parts_->hessian(x, out);
    return out;
  }
  Mat h = -jacobian(x);
  return 0.5 * (h + h.transpose());
}

Vec DriftField::fd_gradient(const Vec& x, double h) const {
  if (!is_gradient()) throw DomainError(name() + ": field has no potential");
  Vec g(dim());
  Vec xp = x, xm = x;
  for (int j = 0; j < dim(); ++j) {
    xp[j] = x[j] + h;
    xm[j] = x[j] - h;
    g[j] = (parts_->potential(xp) - parts_->potential(xm)) / (2.0 * h);
    xp[j] = x[j];
    xm[j] = x[j];
  }
  return g;
}

void DriftField::diffusion_into(const Vec& x, Mat& out) const {
  if (additive_noise()) {
    out.setIdentity(dim(), dim());
  } else {
    parts_->diffusion(x, out);
  }
}

void DriftField::diffusion_derivative_into(const Vec& x, std::vector<Mat>& out) const {
  const int d = dim(), m = noise_dim();
  out.resize(static_cast<std::size_t>(m));
  if (additive_noise()) {
    for (auto& dg : out) dg.setZero(d, d);
    return;
  }
  if (parts_->diffusion_derivative) {
    parts_->diffusion_derivative(x, out);
    return;
  }
  Mat gp(d, m), gm(d, m);
  Vec xp = x, xm = x;
  for (auto& dg : out) dg.resize(d, d);
  for (int j = 0; j < d; ++j) {
    xp[j] = x[j] + kFdStep;
    xm[j] = x[j] - kFdStep;
    parts_->diffusion(xp, gp);
    parts_->diffusion(xm, gm);
    for (int k = 0; k < m; ++k) out[static_cast<std::size_t>(k)].col(j) = (gp.col(k) - gm.col(k)) / (2.0 * kFdStep);
    xp[j] = x[j];
    xm[j] = x[j];
  }
}

Vec DriftField::stratonovich_correction(const Vec& x) const {
  Vec c = Vec::Zero(dim());
  if (additive_noise()) return c;
  Mat g(dim(), noise_dim());
  diffusion_into(x, g);
  std::vector<Mat> dg;
  diffusion_derivative_into(x, dg);
  for (int k = 0; k < noise_dim(); ++k) c += dg[static_cast<std::size_t>(k)] * g.col(k);
  return 0.5 * c;
}

FieldKind parse_field_kind(std::string_view name) {
  if (name == "ou") return FieldKind::ou;
  if (name == "double_well") return FieldKind::double_well;
  if (name == "v_e") return FieldKind::v_e;
  if (name == "v_s") return FieldKind::v_s;
  if (name == "radial_polynomial") return FieldKind::radial_polynomial;
  if (name == "circle_stratonovich") return FieldKind::circle_stratonovich;
  if (name == "linear") return FieldKind::linear;
  throw ConfigError("field.kind", "unknown field kind '" + std::string(name) + "'");
}

std::string_view to_string(FieldKind kind) {
  switch (kind) {
    case FieldKind::ou: return "ou";
    case FieldKind::double_well: return "double_well";
    case FieldKind::v_e: return "v_e";
    case FieldKind::v_s: return "v_s";
    case FieldKind::radial_polynomial: return "radial_polynomial";
    case FieldKind::circle_stratonovich: return "circle_stratonovich";
    case FieldKind::linear: return "linear";
  }
  return "?";
}

DriftField build(const BuiltinSpec& spec) {
  const auto dim_or = [&](int fallback) { return spec.dim == 0 ? fallback : spec.dim; };
  const auto require_dim = [&](int want) {
    if (spec.dim != 0 && spec.dim != want)
      throw ConfigError("field.dim", std::string(to_string(spec.kind)) + " is defined only for d = " +
                                         std::to_string(want));
  };
  if (spec.dim < 0) throw ConfigError("field.dim", "dimension must be positive");

  switch (spec.kind) {
    case FieldKind::ou: {
      DriftField::Parts parts;
      parts.name = "ou";
      parts.dim = dim_or(1);
      parts.drift = [](const Vec& x, Vec& out) { out = -x; };
      parts.jacobian = [](const Vec& x, Mat& out) { out = -Mat::Identity(x.size(), x.size()); };
      parts.potential = [](const Vec& x) { return 0.5 * x.squaredNorm(); };
      parts.hessian = [](const Vec& x, Mat& out) { out.setIdentity(x.size(), x.size()); };
      parts.one_sided_constant = -1.0;
      return DriftField(std::move(parts));
    }
    case FieldKind::double_well: {
      DriftField::Parts parts;
      parts.name = "double_well";
      parts.dim = dim_or(1);
      parts.drift = [](const Vec& x, Vec& out) { out = (1.0 - x.squaredNorm()) * x; };
      parts.jacobian = [](const Vec& x, Mat& out) {
        out = -2.0 * (x * x.transpose());
        out.diagonal().array() += 1.0 - x.squaredNorm();
      };
      parts.potential = [](const Vec& x) {
        const double s = x.squaredNorm();
        return 0.25 * s * s - 0.5 * s;
      };
      parts.hessian = [](const Vec& x, Mat& out) {
        out = 2.0 * (x * x.transpose());
        out.diagonal().array() += x.squaredNorm() - 1.0;
      };
      // (b(x)-b(y), x-y) = |x-y|^2 - (|x|^2 x - |y|^2 y, x-y) and the last term is monotone.
      parts.one_sided_constant = 1.0;
      return DriftField(std::move(parts));
    }
    case FieldKind::v_e: {
      require_dim(2);
      return bump_field("v_e", BumpPotential{0.5,
                                             {{10.0, Eigen::Vector2d(0.0, 1.0)},
                                              {10.0, Eigen::Vector2d(0.0, -1.0)}}});
    }
    case FieldKind::v_s: {
      require_dim(2);
      return bump_field("v_s", BumpPotential{2.0,
                                             {{5.0, Eigen::Vector2d(0.0, 2.0)},
                                              {6.0, Eigen::Vector2d(2.0, -2.0)},
                                              {7.0, Eigen::Vector2d(-2.0, -2.0)}}});
    }
    case FieldKind::radial_polynomial: {
      if (spec.coefficients.empty())
        throw ConfigError("field.params.coefficients", "radial g needs at least one coefficient");
      for (double c : spec.coefficients)
        if (!std::isfinite(c))
          throw ConfigError("field.params.coefficients", "non-finite coefficient: g would not be C^2");
      return radial_field("radial_polynomial", dim_or(1), spec.coefficients);
    }
    case FieldKind::circle_stratonovich: {
      require_dim(1);
      DriftField::Parts parts;
      parts.name = "circle_stratonovich";
      parts.dim = 1;
      parts.noise_dim = 2;
      parts.periodic = true;
      parts.drift = [](const Vec&, Vec& out) { out.setZero(1); };
      parts.jacobian = [](const Vec&, Mat& out) { out.setZero(1, 1); };
      parts.diffusion = [](const Vec& x, Mat& out) {
        out.resize(1, 2);
        out(0, 0) = std::cos(2.0 * x[0]);
        out(0, 1) = std::sin(2.0 * x[0]);
      };
      parts.diffusion_derivative = [](const Vec& x, std::vector<Mat>& out) {
        out.resize(2);
        out[0].resize(1, 1);
        out[1].resize(1, 1);
        out[0](0, 0) = -2.0 * std::sin(2.0 * x[0]);
        out[1](0, 0) = 2.0 * std::cos(2.0 * x[0]);
      };
      return DriftField(std::move(parts));
    }
    case FieldKind::linear: {
      const Mat a = spec.matrix;
      if (a.size() == 0) throw ConfigError("field.params.matrix", "linear field needs a matrix A");
      if (a.rows() != a.cols()) throw ConfigError("field.params.matrix", "A must be square");
      if (spec.dim != 0 && spec.dim != a.rows())
        throw ConfigError("field.dim", "dimension does not match the size of A");
      if (!a.allFinite()) throw ConfigError("field.params.matrix", "non-finite entry");
      DriftField::Parts parts;
      parts.name = "linear";
      parts.dim = static_cast<int>(a.rows());
      parts.drift = [a](const Vec& x, Vec& out) { out.noalias() = a * x; };
      parts.jacobian = [a](const Vec&, Mat& out) { out = a; };
      if ((a - a.transpose()).cwiseAbs().maxCoeff() == 0.0) {
        parts.potential = [a](const Vec& x) { return -0.5 * x.dot(a * x); };
        parts.hessian = [a](const Vec&, Mat& out) { out = -a; };
      }
      parts.one_sided_constant = max_symmetric_eigenvalue(a);
      return DriftField(std::move(parts));
    }
  }
  throw ConfigError("field.kind", "unknown field kind");
}

DriftField build_custom(std::string name, int dim, const std::vector<std::string>& components,
                        const std::optional<std::string>& potential,
                        std::optional<double> one_sided_constant) {
  if (dim < 1) throw ConfigError("field.dim", "dimension must be positive");
  if (components.empty() && !potential)
    throw ConfigError("field.expr", "custom field needs drift expressions or a potential");
  if (!components.empty() && static_cast<int>(components.size()) != dim)
    throw ConfigError("field.expr", "expected " + std::to_string(dim) + " component expressions, got " +
                                        std::to_string(components.size()));
  DriftField::Parts parts;
  parts.name = std::move(name);
  parts.dim = dim;
  parts.one_sided_constant = one_sided_constant;
  std::shared_ptr<const Expression> pot;
  if (potential) {
    pot = std::make_shared<const Expression>(Expression::parse(*potential, dim));
    parts.potential = [pot](const Vec& x) { return (*pot)(x); };
  }
  if (!components.empty()) {
    auto comps = std::make_shared<std::vector<Expression>>();
    for (const auto& c : components) comps->push_back(Expression::parse(c, dim));
    parts.drift = [comps](const Vec& x, Vec& out) {
      for (std::size_t i = 0; i < comps->size(); ++i) out[static_cast<Eigen::Index>(i)] = (*comps)[i](x);
    };
  } else {
    parts.drift = [pot](const Vec& x, Vec& out) {
      Vec xp = x, xm = x;
      for (Eigen::Index j = 0; j < x.size(); ++j) {
        xp[j] = x[j] + kFdStep;
        xm[j] = x[j] - kFdStep;
        out[j] = -((*pot)(xp) - (*pot)(xm)) / (2.0 * kFdStep);
        xp[j] = x[j];
        xm[j] = x[j];
      }
    };
  }
  return DriftField(std::move(parts));
}

Vec eval_drift(const DriftField& field, const Vec& x) { return field.drift(x); }

Mat eval_jacobian(const DriftField& field, const Vec& x) { return field.jacobian(x); }

double max_symmetric_eigenvalue(const Mat& m) {
  const Mat s = 0.5 * (m + m.transpose());
  if (s.rows() == 1) return s(0, 0);
  if (s.rows() == 2) {
    const double mean = 0.5 * (s(0, 0) + s(1, 1));
    const double half = 0.5 * (s(0, 0) - s(1, 1));
    return mean + std::hypot(half, s(0, 1));
  }
  Eigen::SelfAdjointEigenSolver<Mat> es(s, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw ConvergenceError("symmetric eigen-solver did not converge");
  return es.eigenvalues()(s.rows() - 1);
}

double min_symmetric_eigenvalue(const Mat& m) {
  const Mat s = 0.5 * (m + m.transpose());
  if (s.rows() == 1) return s(0, 0);
  if (s.rows() == 2) {
    const double mean = 0.5 * (s(0, 0) + s(1, 1));
    const double half = 0.5 * (s(0, 0) - s(1, 1));
    return mean - std::hypot(half, s(0, 1));
  }
  Eigen::SelfAdjointEigenSolver<Mat> es(s, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw ConvergenceError("symmetric eigen-solver did not converge");
  return es.eigenvalues()(0);
}

double lambda_plus(const DriftField& field, const Vec& x) {
  return max_symmetric_eigenvalue(field.jacobian(x));
}

double lambda_minus(const DriftField& field, const Vec& x) {
  return min_symmetric_eigenvalue(field.jacobian(x));
}

FieldConsistency check_consistency(const DriftField& field, int n_samples, double half_width,
                                   std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-half_width, half_width);
  FieldConsistency c;
  c.min_eigen_gap = std::numeric_limits<double>::infinity();
  Vec x(field.dim());
  for (int i = 0; i < n_samples; ++i) {
    for (int j = 0; j < field.dim(); ++j) x[j] = u(rng);
    const Mat jac = field.jacobian(x);
    if (field.is_gradient()) {
      c.max_gradient_mismatch =
          std::max(c.max_gradient_mismatch, (field.drift(x) + field.fd_gradient(x)).cwiseAbs().maxCoeff());
      c.max_jacobian_asymmetry =
          std::max(c.max_jacobian_asymmetry, (jac - jac.transpose()).cwiseAbs().maxCoeff());
      if (field.has_hessian())
        c.max_jacobian_hessian_mismatch =
            std::max(c.max_jacobian_hessian_mismatch, (jac + field.hessian(x)).cwiseAbs().maxCoeff());
    }
    c.max_fd_jacobian_mismatch =
        std::max(c.max_fd_jacobian_mismatch, (jac - field.fd_jacobian(x)).cwiseAbs().maxCoeff());
    c.min_eigen_gap =
        std::min(c.min_eigen_gap, max_symmetric_eigenvalue(jac) - min_symmetric_eigenvalue(jac));
  }
  return c;
}

}  // namespace rdsync
