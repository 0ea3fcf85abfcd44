#pragma once

#include "rdsync/flow.hpp"
#include "rdsync/measure.hpp"
#include "rdsync/stats.hpp"
#include "rdsync/types.hpp"
#include "rdsync/vectorfield.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace rdsync {

// Euclidean distance, or arc length for periodic (circle) fields.
double chart_distance(const DriftField& field, const Vec& a, const Vec& b);

// Deterministic mesh of n points in B(center, radius): the center, then ceil((n-1)/2) points on
// the sphere, then Halton points in the interior. d = 1 sphere points alternate between the two
// endpoints; d = 2 uses equally spaced angles; d >= 3 maps Halton coordinates to directions.
Points ball_mesh(const Vec& center, double radius, int n);

// Deterministic seed sweeps: member i uses member_seed(base_seed, i); results are reduced
// in member order regardless of the worker count.
struct EnsembleOptions {
  IntegratorSpec integrator{};
  std::uint64_t base_seed = 0;
  int workers = 1;
};

struct QuantileRow {
  double q05 = 0, q25 = 0, q50 = 0, q75 = 0, q95 = 0, max = 0, min = 0;
};

struct SyncReport {
  std::string statistic;  // which quantity the distances are
  std::vector<double> checkpoints;
  std::vector<QuantileRow> distance_quantiles;
  std::vector<double> exceed_prob;  // P[d > epsilon] over non-exploded seeds
  std::vector<Interval> exceed_ci;  // Wilson 95%
  std::vector<std::vector<double>> distances;  // [checkpoint][seed], non-exploded seeds in order
  std::size_t ensemble_size = 0;
  std::size_t exploded = 0;
  double epsilon = 0.0;
  std::string config_hash;
  // ball_diameter only: fraction of all seeds whose final diameter is below epsilon.
  std::optional<double> final_fraction_below;
};

// Distance between phi_t(omega, x) and phi_t(omega, y) over n_seeds independent paths.
SyncReport two_point_sync(const DriftField& field, double sigma, const Vec& x, const Vec& y, double T,
                          std::size_t n_seeds, std::vector<double> checkpoints, double epsilon,
                          const EnsembleOptions& options = {});

// Max pairwise distance of a mesh of B(center, radius) under a shared path.
SyncReport ball_diameter(const DriftField& field, double sigma, const Vec& center, double radius, int mesh_n,
                         double T, std::size_t n_seeds, std::vector<double> checkpoints, double epsilon,
                         const EnsembleOptions& options = {});

struct PullbackEnsemble {
  std::uint64_t seed = 0;
  std::vector<double> times;
  std::vector<Points> endpoints;  // [time][member]: phi_t(theta_{-t} omega, x)
  std::vector<std::vector<char>> exploded;
};

PullbackEnsemble pullback_ensemble(const DriftField& field, double sigma, std::uint64_t seed, const Points& init,
                                   const std::vector<double>& t_list, const IntegratorSpec& integrator = {});

enum class Metric { euclidean, arc };

struct ClusterReport {
  Points points;
  double linkage_epsilon = 0.0;
  std::size_t cluster_count = 0;
  Points centers;            // mean, or circular mean for the arc metric
  std::vector<std::size_t> sizes;
  std::vector<std::size_t> labels;  // clusters numbered by their smallest member index
  double max_intra_cluster_diameter = 0.0;
};

// Single-linkage clustering at threshold linkage_epsilon.
ClusterReport cluster_count(const Points& points, double linkage_epsilon, Metric metric = Metric::euclidean);

// 20 * sigma * sqrt(dt): integrator-scale width of a numerical atom.
double default_linkage_epsilon(double sigma, double dt);

enum class ConditionKind { one_sided_lipschitz, eventual_monotone, monotone_large_sets, gradient_direction };
enum class Verdict { satisfied_empirically, violated_with_witness, inconclusive };

std::string_view to_string(ConditionKind kind);
std::string_view to_string(Verdict verdict);

struct ConditionReport {
  ConditionKind kind{};
  Verdict verdict = Verdict::inconclusive;
  std::map<std::string, double> constants;  // lambda_hat, lambda1_hat, max_quotient, ...
  Points witness;  // violated: the pair (x, y); satisfied: e.g. the center z
  std::size_t samples_used = 0;
  std::string note;
};

// (b(x) - b(y), x - y) / |x - y|^2
double monotonicity_quotient(const DriftField& field, const Vec& x, const Vec& y);

// Replays a violated_with_witness report through eval_drift; true iff the witness still violates.
bool replay_violation(const DriftField& field, const ConditionReport& report);

ConditionReport check_one_sided_lipschitz(const DriftField& field, const Box& box, std::size_t n_pairs,
                                          std::uint64_t seed);
ConditionReport check_eventual_monotone(const DriftField& field, double R, std::size_t n_pairs, std::uint64_t seed);
ConditionReport check_monotone_on_large_sets(const DriftField& field, double r, const Points& z_candidates,
                                             std::size_t n_pairs, std::uint64_t seed);
ConditionReport gradient_direction_search(const DriftField& field, const Vec& v, const Points& z_grid);

struct SwiftControlOptions {
  int n_steps = 200;  // grid steps on [0, t0]
  int mesh_n = 32;
  int bound_samples = 4096;  // points used to estimate B
  Scheme scheme = Scheme::euler_maruyama;
};

struct SwiftControlResult {
  double B = 0.0;      // sampled sup |b(x + v)| over |v| <= r + |z| + 1
  double T0 = 0.0;     // min((delta ^ 1) / (4B), 1)
  double t0 = 0.0;
  double dt = 0.0;
  std::vector<double> times;
  Points control;      // f(t) on the grid
  double residual = 0.0;  // |phi^f_{t0}(x) - (x + z)|
  Points mesh;
  double mesh_max_error = 0.0;  // max over mesh of |phi^f_{t0}(x') - (x' + z)|
  bool all_within_delta = false;
};

// Control steering x to x + z along psi(t) = x + (t/t0) z. t0 <= 0 selects T0.
// Throws DomainError if t0 > T0.
SwiftControlResult swift_control(const DriftField& field, double sigma, const Vec& x, double r, const Vec& z,
                                 double t0, double delta, const SwiftControlOptions& options = {});

struct ContractionOptions {
  int mesh_n = 64;
  std::size_t n_pairs = 20000;
  std::uint64_t seed = 1;
  IntegratorSpec integrator{Scheme::euler_maruyama, 1e-3};
};

struct ContractionWitness {
  double c = 0.0;       // contraction constant used
  double T0 = 0.0;      // smallest grid time with exp(-c T0) <= 1/9
  double ratio = 0.0;   // max pairwise endpoint distance / (2R)
  bool satisfied = false;  // ratio <= 1/4
  Points endpoints;
};

// Freezing control omega0(t) = -t b(z)/sigma applied to a mesh of B(z, R). c_estimate <= 0
// estimates c as minus the sampled max quotient over pairs in B(z, 2R) with |x - y| >= R/9.
ContractionWitness contraction_witness(const DriftField& field, double sigma, double R, const Vec& z,
                                       double c_estimate, const ContractionOptions& options = {});

}  // namespace rdsync
