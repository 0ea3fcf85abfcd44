#pragma once

#include "rdsync/flow.hpp"
#include "rdsync/measure.hpp"
#include "rdsync/types.hpp"
#include "rdsync/vectorfield.hpp"

#include <cstdint>
#include <vector>

namespace rdsync {

struct LyapunovOptions {
  int k = 1;               // number of exponents
  double T = 200.0;        // total model time, burn-in included
  double burn_in = -1.0;   // negative: T / 10
  int qr_every = 10;
  double dt = 1e-3;
  Scheme scheme = Scheme::tamed_euler;
  int n_blocks = 20;
  int running_points = 200;  // samples of the running estimate after burn-in
};

struct RunningEstimate {
  double t;                        // model time since burn-in
  std::vector<double> exponents;   // in frame-column order
};

struct LyapunovSpectrum {
  std::vector<double> exponents;          // descending, per unit model time
  std::vector<double> block_std_errors;   // aligned with exponents
  double T_effective = 0.0;
  double dt = 0.0;
  std::uint64_t seed = 0;
  Vec x0;
  double max_orthonormality_error = 0.0;
  std::vector<RunningEstimate> running;

  double top() const { return exponents.front(); }
  double top_se() const { return block_std_errors.front(); }
};

// QR (Benettin) estimate of the first k exponents along one noise realization.
LyapunovSpectrum spectrum_benettin(const DriftField& field, double sigma, std::uint64_t seed, const Vec& x0,
                                   const LyapunovOptions& options);

struct TwoPointOptions {
  double delta0 = 1e-8;
  double T = 200.0;
  double renorm_threshold = 10.0;  // renormalize once the separation leaves [delta0/thr, delta0*thr]
  double dt = 1e-3;
  Scheme scheme = Scheme::tamed_euler;
  int n_blocks = 20;
};

struct TwoPointEstimate {
  double exponent = 0.0;
  double std_error = 0.0;
};

// Top exponent from a nearby pair driven by the same noise, renormalized to delta0.
TwoPointEstimate top_exponent_twopoint(const DriftField& field, double sigma, std::uint64_t seed, const Vec& x0,
                                       const TwoPointOptions& options = {});

// Quadrature of lambda_plus against the Gibbs measure; an upper bound for the top exponent.
QuadratureResult lambda_plus_bound(const DriftField& field, const GibbsMeasure& gibbs);

// In d = 1 the top exponent of a gradient field equals the Gibbs average of b'.
QuadratureResult gradient_1d_exponent(const DriftField& field, const GibbsMeasure& gibbs);

}  // namespace rdsync
