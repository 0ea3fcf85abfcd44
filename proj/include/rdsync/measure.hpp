#pragma once

#include "rdsync/flow.hpp"
#include "rdsync/types.hpp"
#include "rdsync/vectorfield.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

namespace rdsync {

struct QuadratureResult {
  double value = 0.0;
  double error = 0.0;  // |fine - coarse| refinement estimate
};

// The cube [lo, hi]^d.
struct Box {
  double lo = -5.0;
  double hi = 5.0;
};

struct GibbsOptions {
  std::optional<Box> box;  // unset: start at [-5, 5]^d and expand until the tail is negligible
  int points_per_axis = 0;  // coarse grid; 0 picks 801 / 401 / 61 for d = 1 / 2 / 3
  double tail_tolerance = 1e-8;
  double refinement_tolerance = 1e-6;
  int max_expansions = 12;
};

// Gibbs density rho = exp(-2V/sigma^2) / Z on R^d, d <= 3, tabulated on a nested pair of
// tensor trapezoid grids (N and 2N-1 points per axis).
class GibbsMeasure {
 public:
  const DriftField& field() const { return field_; }
  double sigma() const { return sigma_; }
  double Z() const;
  double log_Z() const { return log_z_; }
  Box box() const { return box_; }
  int grid_points_per_axis() const { return n_; }
  double tail_mass_estimate() const { return tail_; }
  // |Z_fine - Z_coarse| / Z_fine
  double normalization_refinement() const { return z_refinement_; }

  double density(const Vec& x) const;
  QuadratureResult expect(const std::function<double(const Vec&)>& f) const;
  // rho(B(center, R)) by polar Gauss-Legendre quadrature.
  QuadratureResult ball_mass(double R, const Vec& center) const;
  QuadratureResult ball_mass(double R) const { return ball_mass(R, Vec::Zero(field_.dim())); }
  // Mass of the axis-aligned cell [lower, upper] (tensor Gauss-Legendre).
  double cell_mass(const Vec& lower, const Vec& upper) const;

 private:
  friend GibbsMeasure normalize(const DriftField& field, double sigma, const GibbsOptions& options);
  GibbsMeasure(const DriftField& field, double sigma) : field_(field), sigma_(sigma) {}
  double unnormalized(const Vec& x) const;
  Vec fine_point(std::size_t flat) const;

  DriftField field_;
  double sigma_;
  Box box_;
  int n_ = 0;       // coarse points per axis
  int n_fine_ = 0;  // 2n - 1
  double v_ref_ = 0.0;  // potential shift used in the stored weights
  double log_z_ = 0.0;
  double z_fine_rel_ = 0.0;    // sum of trapezoid weights * exp(-2(V - v_ref)/sigma^2), fine grid
  double z_coarse_rel_ = 0.0;
  double tail_ = 0.0;
  double z_refinement_ = 0.0;
  std::vector<double> weights_fine_;  // unnormalized density times fine trapezoid weight
};

// Throws DomainError for non-gradient fields, d > 3 or sigma <= 0; NumericRangeError when
// the density is not integrable (tail never falls below tolerance); ConvergenceError when
// the N and 2N-1 grids disagree on Z beyond the refinement tolerance.
GibbsMeasure normalize(const DriftField& field, double sigma, const GibbsOptions& options = {});

struct SampleOptions {
  double burn_in = 10.0;  // model time discarded before the first sample
  double thin = 1.0;      // model time between samples
  double dt = 1e-3;
  Scheme scheme = Scheme::tamed_euler;
};

// Subsampled states of one long trajectory of dX = b dt + sigma dW started at x0.
Points sample_stationary(const DriftField& field, double sigma, std::size_t n, std::uint64_t seed,
                         const SampleOptions& options, const Vec& x0);

// Thinning heuristic 1/|E_rho lambda_plus| clipped to [0.1, 10] (1.0 if the average is >= 0).
double default_thin(const GibbsMeasure& gibbs);

// Samples from gibbs.field() started at the origin; thin <= 0 uses default_thin.
Points sample(const GibbsMeasure& gibbs, std::size_t n, std::uint64_t seed, double burn_in, double thin);

struct GibbsSpec {
  DriftField field;
  double sigma;
  SampleOptions sampling{};
};

struct MonteCarloEstimate {
  double estimate = 0.0;
  double standard_error = 0.0;  // batch means over 20 batches
};

MonteCarloEstimate mc_expect(const GibbsSpec& spec, const std::function<double(const Vec&)>& f, std::size_t n,
                             std::uint64_t seed);

// Gauss-Legendre nodes and weights on [-1, 1].
void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights);

}  // namespace rdsync
