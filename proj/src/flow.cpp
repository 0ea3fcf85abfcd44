#include "rdsync/flow.hpp"

#include "rdsync/error.hpp"

#include <Eigen/LU>
#include <Eigen/QR>

#include <cmath>

namespace rdsync {

Scheme parse_scheme(std::string_view name) {
  if (name == "euler_maruyama" || name == "em") return Scheme::euler_maruyama;
  if (name == "tamed_euler" || name == "tamed") return Scheme::tamed_euler;
  if (name == "split_step_implicit" || name == "split_step") return Scheme::split_step_implicit;
  throw ConfigError("integrator.scheme", "unknown scheme '" + std::string(name) + "'");
}

std::string_view to_string(Scheme scheme) {
  switch (scheme) {
    case Scheme::euler_maruyama: return "euler_maruyama";
    case Scheme::tamed_euler: return "tamed_euler";
    case Scheme::split_step_implicit: return "split_step_implicit";
  }
  return "?";
}

void wrap_state(const DriftField& field, Vec& x) {
  if (!field.periodic()) return;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    double a = std::fmod(x[i], kTwoPi);
    if (a < 0.0) a += kTwoPi;
    if (a >= kTwoPi) a = 0.0;
    x[i] = a;
  }
}

Stepper::Stepper(const DriftField& field, const IntegratorSpec& spec, double sigma)
    : field_(field), spec_(spec), sigma_(sigma) {
  if (!(spec.dt > 0.0)) throw DomainError("integrator dt must be positive");
  if (!(spec.newton_tol > 0.0)) throw DomainError("newton_tol must be positive");
  if (spec.newton_max_iter < 1) throw DomainError("newton_max_iter must be at least 1");
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw DomainError("sigma must be finite and non-negative");
  const int d = field.dim();
  b_.resize(d);
  y_.resize(d);
  f_.resize(d);
  delta_.resize(d);
  db_.resize(d, d);
  g_.resize(d, field.noise_dim());
}

void Stepper::ito_drift(const Vec& x, Vec& out) {
  field_.drift_into(x, out);
  if (!field_.additive_noise()) out += (sigma_ * sigma_) * field_.stratonovich_correction(x);
}

void Stepper::ito_jacobian(const Vec& x, Mat& out) {
  field_.jacobian_into(x, out);
  if (field_.additive_noise() || sigma_ == 0.0) return;
  const int d = field_.dim();
  Vec xp = x, xm = x;
  for (int j = 0; j < d; ++j) {
    xp[j] = x[j] + kFdStep;
    xm[j] = x[j] - kFdStep;
    out.col(j) += (sigma_ * sigma_) *
                  (field_.stratonovich_correction(xp) - field_.stratonovich_correction(xm)) / (2.0 * kFdStep);
    xp[j] = x[j];
    xm[j] = x[j];
  }
}

void Stepper::deterministic(const Vec& x, Vec& y) {
  const double dt = spec_.dt;
  switch (spec_.scheme) {
    case Scheme::euler_maruyama:
      ito_drift(x, b_);
      y = x + dt * b_;
      return;
    case Scheme::tamed_euler: {
      ito_drift(x, b_);
      y = x + (dt / (1.0 + dt * b_.norm())) * b_;
      return;
    }
    case Scheme::split_step_implicit: {
      const int d = field_.dim();
      y = x;
      for (int it = 0; it < spec_.newton_max_iter; ++it) {
        ito_drift(y, b_);
        f_ = y - x - dt * b_;
        ito_jacobian(y, db_);
        if (d == 1) {
          delta_[0] = f_[0] / (1.0 - dt * db_(0, 0));
        } else {
          newton_ = Mat::Identity(d, d) - dt * db_;
          delta_ = newton_.partialPivLu().solve(f_);
        }
        y -= delta_;
        if (!delta_.allFinite()) break;
        if (delta_.cwiseAbs().maxCoeff() <= spec_.newton_tol * (1.0 + y.cwiseAbs().maxCoeff())) return;
      }
      throw ConvergenceError("split-step Newton iteration did not converge (dt too large for the drift)");
    }
  }
}

void Stepper::deterministic_jacobian(const Vec& x, const Vec& y, Mat& jac) {
  const int d = field_.dim();
  const double dt = spec_.dt;
  switch (spec_.scheme) {
    case Scheme::euler_maruyama:
      ito_jacobian(x, db_);
      jac = dt * db_;
      jac.diagonal().array() += 1.0;
      return;
    case Scheme::tamed_euler: {
      ito_drift(x, b_);
      ito_jacobian(x, db_);
      const double nb = b_.norm();
      const double den = 1.0 + dt * nb;
      jac = (dt / den) * db_;
      if (nb > 0.0) jac -= (dt * dt / (den * den * nb)) * (b_ * (b_.transpose() * db_));
      jac.diagonal().array() += 1.0;
      return;
    }
    case Scheme::split_step_implicit: {
      ito_jacobian(y, db_);
      newton_ = Mat::Identity(d, d) - dt * db_;
      jac = newton_.partialPivLu().inverse();
      return;
    }
  }
}

void Stepper::add_noise(const Vec& x_old, const Vec& dw, Vec& y) {
  if (sigma_ == 0.0) return;
  if (field_.additive_noise()) {
    y += sigma_ * dw;
  } else {
    field_.diffusion_into(x_old, g_);
    y.noalias() += sigma_ * (g_ * dw);
  }
}

bool Stepper::accept(Vec& x, Vec& y) {
  if (!y.allFinite()) return false;
  if (field_.periodic()) {
    wrap_state(field_, y);
  } else if (y.norm() > kExplosionNorm) {
    return false;
  }
  x.swap(y);
  return true;
}

bool Stepper::step(Vec& x, const Vec& dw) {
  deterministic(x, y_);
  add_noise(x, dw, y_);
  return accept(x, y_);
}

bool Stepper::step_with_jacobian(Vec& x, const Vec& dw, Mat& jac) {
  deterministic(x, y_);
  deterministic_jacobian(x, y_, jac);
  if (!field_.additive_noise() && sigma_ != 0.0) {
    field_.diffusion_derivative_into(x, dg_);
    for (int k = 0; k < field_.noise_dim(); ++k) jac += (sigma_ * dw[k]) * dg_[static_cast<std::size_t>(k)];
  }
  add_noise(x, dw, y_);
  return accept(x, y_);
}

Vec step(const DriftField& field, const IntegratorSpec& spec, double sigma, const Vec& x, const Vec& dw) {
  if (x.size() != field.dim() || !x.allFinite()) throw NumericRangeError("step: state must be finite with dimension d");
  if (dw.size() != field.noise_dim()) throw DomainError("step: noise increment has wrong dimension");
  Stepper s(field, spec, sigma);
  Vec y = x;
  if (!s.step(y, dw)) throw NumericRangeError("step: state exploded");
  return y;
}

namespace {

void check_compatible(const DriftField& field, const IntegratorSpec& spec, const WienerPath& path, const Vec& x0) {
  if (std::abs(spec.dt - path.delta()) > 1e-12 * path.delta())
    throw DomainError("integrator dt must equal the noise delta");
  if (path.dim() != field.noise_dim())
    throw DomainError("noise dimension " + std::to_string(path.dim()) + " does not match field noise dimension " +
                      std::to_string(field.noise_dim()));
  if (x0.size() != field.dim()) throw DomainError("initial state has the wrong dimension");
  if (!x0.allFinite()) throw NumericRangeError("initial state is not finite");
}

std::pair<std::int64_t, std::int64_t> index_range(const WienerPath& path, double t0, double t1) {
  const std::int64_t k0 = path.index_of(t0), k1 = path.index_of(t1);
  if (k1 < k0) throw WindowError("evolve: t1 precedes t0");
  if (!path.contains(k0) || !path.contains(k1)) throw WindowError("evolve: [t0, t1] leaves the noise window");
  return {k0, k1};
}

}  // namespace

Trajectory evolve(const DriftField& field, const IntegratorSpec& spec, double sigma, const WienerPath& path,
                  const Vec& x0, double t0, double t1, int record_every) {
  check_compatible(field, spec, path, x0);
  const auto [k0, k1] = index_range(path, t0, t1);
  Stepper stepper(field, spec, sigma);
  Trajectory traj;
  traj.seed = path.seed();
  traj.origin_offset = path.origin_offset();
  Vec x = x0;
  wrap_state(field, x);
  Vec dw(path.dim());
  traj.times.push_back(static_cast<double>(k0) * path.delta());
  traj.states.push_back(x);
  for (std::int64_t k = k0; k < k1; ++k) {
    if (!traj.exploded) {
      path.increment_into(k, dw);
      if (!stepper.step(x, dw)) {
        traj.exploded = true;
        traj.explosion_time = static_cast<double>(k + 1) * path.delta();
      }
    }
    const bool last = k + 1 == k1;
    if (last || (record_every > 0 && (k + 1 - k0) % record_every == 0)) {
      traj.times.push_back(static_cast<double>(k + 1) * path.delta());
      traj.states.push_back(x);
    }
  }
  return traj;
}

void advance_ensemble(Stepper& stepper, const WienerPath& path, Points& states, std::vector<char>& exploded,
                      std::int64_t k_from, std::int64_t k_to) {
  Vec dw(path.dim());
  for (std::int64_t k = k_from; k < k_to; ++k) {
    path.increment_into(k, dw);
    for (std::size_t i = 0; i < states.size(); ++i) {
      if (exploded[i]) continue;
      if (!stepper.step(states[i], dw)) exploded[i] = 1;
    }
  }
}

EnsembleEnd evolve_ensemble(const DriftField& field, const IntegratorSpec& spec, double sigma,
                            const WienerPath& path, const Points& x0, double t0, double t1) {
  for (const auto& x : x0) check_compatible(field, spec, path, x);
  const auto [k0, k1] = index_range(path, t0, t1);
  Stepper stepper(field, spec, sigma);
  EnsembleEnd out{x0, std::vector<char>(x0.size(), 0)};
  for (auto& x : out.endpoints) wrap_state(field, x);
  advance_ensemble(stepper, path, out.endpoints, out.exploded, k0, k1);
  return out;
}

TangentIntegrator::TangentIntegrator(const DriftField& field, const IntegratorSpec& spec, double sigma,
                                     const WienerPath& path, const Vec& x0, int k, std::int64_t k_start)
    : stepper_(field, spec, sigma), path_(path), x_(x0), dw_(path.dim()), k_(k_start) {
  check_compatible(field, spec, path, x0);
  const int d = field.dim();
  if (k < 1 || k > d) throw DomainError("tangent frame size k must satisfy 1 <= k <= d");
  wrap_state(field, x_);
  jac_.resize(d, d);
  frame_.frame = Mat::Identity(d, k);
  frame_.log_r = Vec::Zero(k);
}

bool TangentIntegrator::step_once() {
  if (k_ + 1 > path_.k_max() || k_ < path_.k_min()) throw WindowError("tangent integration leaves the noise window");
  path_.increment_into(k_, dw_);
  if (!stepper_.step_with_jacobian(x_, dw_, jac_))
    throw NumericRangeError("state exploded during tangent integration at step " + std::to_string(k_));
  tmp_.noalias() = jac_ * frame_.frame;
  frame_.frame.swap(tmp_);
  ++k_;
  return true;
}

void TangentIntegrator::orthonormalize() {
  const auto k = frame_.frame.cols();
  const auto d = frame_.frame.rows();
  if (k == 1) {
    const double r = frame_.frame.col(0).norm();
    if (!(r > 0.0) || !std::isfinite(r)) throw ConvergenceError("QR breakdown (rank deficiency)", k_);
    frame_.frame /= r;
    frame_.log_r[0] += std::log(r);
  } else {
    Eigen::HouseholderQR<Mat> qr(frame_.frame);
    Mat q = qr.householderQ() * Mat::Identity(d, k);
    const Mat& packed = qr.matrixQR();
    for (Eigen::Index i = 0; i < k; ++i) {
      const double rii = packed(i, i);
      if (!(std::abs(rii) > 0.0) || !std::isfinite(rii)) throw ConvergenceError("QR breakdown (rank deficiency)", k_);
      if (rii < 0.0) q.col(i) = -q.col(i);
      frame_.log_r[i] += std::log(std::abs(rii));
    }
    frame_.frame = std::move(q);
  }
  const double err = (frame_.frame.transpose() * frame_.frame - Mat::Identity(k, k)).cwiseAbs().maxCoeff();
  frame_.max_orthonormality_error = std::max(frame_.max_orthonormality_error, err);
  ++frame_.qr_count;
  since_qr_ = 0;
}

void TangentIntegrator::advance(std::int64_t steps, int qr_every, bool final_qr) {
  advance(steps, qr_every, final_qr, [](const Vec&) {});
}

std::pair<Trajectory, TangentFrame> tangent_evolve(const DriftField& field, const IntegratorSpec& spec,
                                                   double sigma, const WienerPath& path, const Vec& x0, int k,
                                                   double t0, double t1, int qr_every, int record_every) {
  if (qr_every < 1) throw DomainError("qr_every must be at least 1");
  const auto [k0, k1] = index_range(path, t0, t1);
  TangentIntegrator ti(field, spec, sigma, path, x0, k, k0);
  Trajectory traj;
  traj.seed = path.seed();
  traj.origin_offset = path.origin_offset();
  traj.times.push_back(static_cast<double>(k0) * path.delta());
  traj.states.push_back(ti.state());
  const std::int64_t total = k1 - k0;
  const std::int64_t chunk = record_every > 0 ? record_every : std::max<std::int64_t>(total, 1);
  for (std::int64_t done = 0; done < total;) {
    const std::int64_t n = std::min(chunk, total - done);
    done += n;
    ti.advance(n, qr_every, done == total);
    traj.times.push_back(static_cast<double>(k0 + done) * path.delta());
    traj.states.push_back(ti.state());
  }
  return {std::move(traj), ti.frame()};
}

Vec pullback_evolve(const DriftField& field, const IntegratorSpec& spec, double sigma, const WienerPath& path,
                    const Vec& x0, double t) {
  if (t < 0.0) throw DomainError("pullback time must be non-negative");
  const std::int64_t n = path.index_of(t);
  if (!path.contains(-n)) throw WindowError("pullback: noise window does not contain [-t, 0]");
  const WienerPath shifted = path.shift_steps(-n);
  return evolve(field, spec, sigma, shifted, x0, 0.0, t, 0).end();
}

}  // namespace rdsync
