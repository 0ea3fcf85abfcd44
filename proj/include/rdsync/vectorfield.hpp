#pragma once

#include "rdsync/types.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace rdsync {

// Central finite-difference step used for gradients and fallback Jacobians.
inline constexpr double kFdStep = 1e-5;

// A drift b: R^d -> R^d of an SDE dX = b(X)dt + sigma dW, with optional
// potential (gradient type, b = -grad V), analytic Jacobian and Hessian.
//
// Most fields have additive noise (one Wiener component per coordinate).
// The circle example instead carries Stratonovich diffusion columns g_k and a
// periodic chart [0, 2pi); `drift` is then the Stratonovich drift and the flow
// adds sigma^2 * stratonovich_correction(x) to obtain the Ito drift.
//
// Immutable after construction; copies share the same model.
class DriftField {
 public:
  using VecFn = std::function<void(const Vec&, Vec&)>;
  using MatFn = std::function<void(const Vec&, Mat&)>;
  using ScalarFn = std::function<double(const Vec&)>;
  using MatListFn = std::function<void(const Vec&, std::vector<Mat>&)>;

  struct Parts {
    std::string name;
    int dim = 0;
    VecFn drift;
    MatFn jacobian;    // optional
    ScalarFn potential;  // optional, present iff gradient type
    MatFn hessian;     // optional, requires potential
    std::optional<double> one_sided_constant;
    // Non-additive noise (circle chart only). noise_dim == 0 means additive identity.
    int noise_dim = 0;
    MatFn diffusion;              // d x noise_dim
    MatListFn diffusion_derivative;  // noise_dim matrices, each d x d; optional (FD fallback)
    bool periodic = false;
  };

  explicit DriftField(Parts parts);

  const std::string& name() const { return parts_->name; }
  int dim() const { return parts_->dim; }
  int noise_dim() const { return parts_->noise_dim == 0 ? parts_->dim : parts_->noise_dim; }
  bool additive_noise() const { return parts_->noise_dim == 0; }
  bool periodic() const { return parts_->periodic; }
  bool is_gradient() const { return static_cast<bool>(parts_->potential); }
  bool has_analytic_jacobian() const { return static_cast<bool>(parts_->jacobian); }
  bool has_hessian() const { return static_cast<bool>(parts_->hessian); }
  std::optional<double> one_sided_constant() const { return parts_->one_sided_constant; }

  // Unchecked hot-path evaluation; `out` must already have the right size.
  void drift_into(const Vec& x, Vec& out) const { parts_->drift(x, out); }
  void jacobian_into(const Vec& x, Mat& out) const;

  // Checked evaluation: throws NumericRangeError on non-finite input or output.
  Vec drift(const Vec& x) const;
  Mat jacobian(const Vec& x) const;
  Mat fd_jacobian(const Vec& x, double h = kFdStep) const;

  // Gradient-type only; throw DomainError otherwise.
  double potential(const Vec& x) const;
  Mat hessian(const Vec& x) const;
  Vec fd_gradient(const Vec& x, double h = kFdStep) const;

  // Diffusion columns (d x noise_dim). Identity for additive noise.
  void diffusion_into(const Vec& x, Mat& out) const;
  void diffusion_derivative_into(const Vec& x, std::vector<Mat>& out) const;
  // 1/2 sum_k Dg_k(x) g_k(x); zero vector for additive noise.
  Vec stratonovich_correction(const Vec& x) const;

 private:
  std::shared_ptr<const Parts> parts_;
};

enum class FieldKind { ou, double_well, v_e, v_s, radial_polynomial, circle_stratonovich, linear };

FieldKind parse_field_kind(std::string_view name);  // throws ConfigError
std::string_view to_string(FieldKind kind);

struct BuiltinSpec {
  FieldKind kind = FieldKind::ou;
  int dim = 0;                        // 0: kind default (1, or 2 for v_e/v_s, rows of A for linear)
  std::vector<double> coefficients;   // radial_polynomial: g(s) = sum_i c_i s^i, V(x) = g(|x|^2)
  Mat matrix;                         // linear: b(x) = A x
};

DriftField build(const BuiltinSpec& spec);

// Custom field from per-coordinate expressions over x1..xd. If `potential` is
// given and `components` is empty, the drift is -grad V by central differences.
DriftField build_custom(std::string name, int dim, const std::vector<std::string>& components,
                        const std::optional<std::string>& potential,
                        std::optional<double> one_sided_constant);

Vec eval_drift(const DriftField& field, const Vec& x);
Mat eval_jacobian(const DriftField& field, const Vec& x);

// Extreme eigenvalues of the symmetric part (Db + Db^T)/2.
double lambda_plus(const DriftField& field, const Vec& x);
double lambda_minus(const DriftField& field, const Vec& x);
double max_symmetric_eigenvalue(const Mat& m);
double min_symmetric_eigenvalue(const Mat& m);

// Sampled consistency of the declared structure over the cube [-half_width, half_width]^d.
struct FieldConsistency {
  double max_gradient_mismatch = 0.0;  // |b + grad_FD V|_inf
  double max_jacobian_asymmetry = 0.0;  // |Db - Db^T|_inf
  double max_jacobian_hessian_mismatch = 0.0;  // |Db + D^2 V|_inf
  double max_fd_jacobian_mismatch = 0.0;  // |Db - FD(b)|_inf
  double min_eigen_gap = 0.0;  // min (lambda_plus - lambda_minus)
};
FieldConsistency check_consistency(const DriftField& field, int n_samples, double half_width,
                                   std::uint64_t seed);

}  // namespace rdsync
