#pragma once

#include "rdsync/noise.hpp"
#include "rdsync/types.hpp"
#include "rdsync/vectorfield.hpp"

#include <cstdint>
#include <optional>
#include <string_view>
#include <utility>
#include <vector>

namespace rdsync {

enum class Scheme { euler_maruyama, tamed_euler, split_step_implicit };

Scheme parse_scheme(std::string_view name);  // throws ConfigError
std::string_view to_string(Scheme scheme);

struct IntegratorSpec {
  Scheme scheme = Scheme::tamed_euler;
  double dt = 1e-3;  // must equal the noise delta
  double newton_tol = 1e-12;
  int newton_max_iter = 50;
};

// States whose norm exceeds this are flagged as exploded and frozen.
inline constexpr double kExplosionNorm = 1e8;

struct Trajectory {
  std::vector<double> times;
  Points states;
  std::uint64_t seed = 0;
  std::int64_t origin_offset = 0;
  bool exploded = false;
  std::optional<double> explosion_time;

  const Vec& end() const { return states.back(); }
};

struct TangentFrame {
  Mat frame;      // d x k, orthonormal after each re-orthonormalization
  Vec log_r;      // running sums of log R_ii
  long qr_count = 0;
  double max_orthonormality_error = 0.0;
};

// One-step map of a scheme with reusable buffers. Not thread-safe; give each worker its own.
//   euler_maruyama:       x + dt b(x) + sigma dW
//   tamed_euler:          x + dt b(x) / (1 + dt |b(x)|) + sigma dW
//   split_step_implicit:  y = x + dt b(y) by Newton, then y + sigma dW
// For non-additive noise (circle chart) b is the Ito drift and the noise term is sigma G(x) dW.
class Stepper {
 public:
  Stepper(const DriftField& field, const IntegratorSpec& spec, double sigma);

  // Advances x in place. Returns false (leaving x unchanged) when the new state is non-finite
  // or exceeds kExplosionNorm.
  bool step(Vec& x, const Vec& dw);
  // As step(), also writing the Jacobian of the one-step map at the old x into `jac`.
  bool step_with_jacobian(Vec& x, const Vec& dw, Mat& jac);

  const DriftField& field() const { return field_; }
  const IntegratorSpec& spec() const { return spec_; }
  double sigma() const { return sigma_; }

 private:
  void ito_drift(const Vec& x, Vec& out);
  void ito_jacobian(const Vec& x, Mat& out);
  void deterministic(const Vec& x, Vec& y);
  void deterministic_jacobian(const Vec& x, const Vec& y, Mat& jac);
  void add_noise(const Vec& x_old, const Vec& dw, Vec& y);
  bool accept(Vec& x, Vec& y);

  DriftField field_;
  IntegratorSpec spec_;
  double sigma_;
  Vec b_, y_, f_, delta_;
  Mat db_, g_, newton_;
  std::vector<Mat> dg_;
};

Vec step(const DriftField& field, const IntegratorSpec& spec, double sigma, const Vec& x, const Vec& dw);

// Integrates x0 over [t0, t1] with the increments of `path`. Records every `record_every`-th
// state (0: endpoints only). The final state is always recorded.
Trajectory evolve(const DriftField& field, const IntegratorSpec& spec, double sigma, const WienerPath& path,
                  const Vec& x0, double t0, double t1, int record_every = 1);

struct EnsembleEnd {
  Points endpoints;
  std::vector<char> exploded;
};

// All members are driven by the identical increments; member-wise equal to evolve().
EnsembleEnd evolve_ensemble(const DriftField& field, const IntegratorSpec& spec, double sigma,
                            const WienerPath& path, const Points& x0, double t0, double t1);

// Lower-level ensemble stepping between grid indices, for diagnostics that observe checkpoints.
void advance_ensemble(Stepper& stepper, const WienerPath& path, Points& states, std::vector<char>& exploded,
                      std::int64_t k_from, std::int64_t k_to);

// Co-integrates state and a k-frame of the discrete tangent map with periodic QR.
class TangentIntegrator {
 public:
  TangentIntegrator(const DriftField& field, const IntegratorSpec& spec, double sigma, const WienerPath& path,
                    const Vec& x0, int k, std::int64_t k_start);

  // Advances `steps` grid steps, re-orthonormalizing every qr_every steps (the cadence carries
  // over between calls) and, if final_qr, once more at the end so log_r is complete.
  // Throws ConvergenceError on QR breakdown and NumericRangeError on explosion.
  void advance(std::int64_t steps, int qr_every, bool final_qr = true);
  // Same, also calling on_step(state) before every step.
  template <class OnStep>
  void advance(std::int64_t steps, int qr_every, bool final_qr, OnStep&& on_step);

  const Vec& state() const { return x_; }
  const TangentFrame& frame() const { return frame_; }
  std::int64_t index() const { return k_; }
  // Zeroes the log R accumulators (e.g. after burn-in).
  void reset_accumulators() { frame_.log_r.setZero(); }

 private:
  void orthonormalize();
  bool step_once();

  Stepper stepper_;
  WienerPath path_;
  Vec x_, dw_;
  Mat jac_, tmp_;
  TangentFrame frame_;
  std::int64_t k_;
  int since_qr_ = 0;
};

template <class OnStep>
void TangentIntegrator::advance(std::int64_t steps, int qr_every, bool final_qr, OnStep&& on_step) {
  for (std::int64_t i = 0; i < steps; ++i) {
    on_step(static_cast<const Vec&>(x_));
    step_once();
    if (++since_qr_ >= qr_every) orthonormalize();
  }
  if (final_qr && since_qr_ > 0) orthonormalize();
}

std::pair<Trajectory, TangentFrame> tangent_evolve(const DriftField& field, const IntegratorSpec& spec,
                                                   double sigma, const WienerPath& path, const Vec& x0, int k,
                                                   double t0, double t1, int qr_every, int record_every = 1);

// phi_t(theta_{-t} omega, x0) = evolve(shift(path, -t), x0, 0, t).end
Vec pullback_evolve(const DriftField& field, const IntegratorSpec& spec, double sigma, const WienerPath& path,
                    const Vec& x0, double t);

// Wraps angles of a periodic field into [0, 2pi); identity otherwise.
void wrap_state(const DriftField& field, Vec& x);

}  // namespace rdsync
