#include "rdsync/diagnostics.hpp"

#include "rdsync/error.hpp"
#include "rdsync/noise.hpp"
#include "rdsync/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>

namespace rdsync {

double chart_distance(const DriftField& field, const Vec& a, const Vec& b) {
  if (!field.periodic()) return (a - b).norm();
  double s = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double d = std::remainder(a[i] - b[i], kTwoPi);
    s += d * d;
  }
  return std::sqrt(s);
}

namespace {

// Number of Halton coordinates consumed by direction_from.
int direction_coords(int d) { return d <= 2 ? 1 : d == 3 ? 2 : 2 * ((d + 1) / 2); }

Vec direction_from(int d, const double* u) {
  Vec v(d);
  if (d == 1) {
    v[0] = u[0] < 0.5 ? -1.0 : 1.0;
  } else if (d == 2) {
    v[0] = std::cos(kTwoPi * u[0]);
    v[1] = std::sin(kTwoPi * u[0]);
  } else if (d == 3) {
    const double zc = 2.0 * u[0] - 1.0, s = std::sqrt(std::max(0.0, 1.0 - zc * zc));
    v << s * std::cos(kTwoPi * u[1]), s * std::sin(kTwoPi * u[1]), zc;
  } else {
    for (int i = 0; i < d; i += 2) {
      const double rad = std::sqrt(-2.0 * std::log(std::max(u[i], 1e-300)));
      v[i] = rad * std::cos(kTwoPi * u[i + 1]);
      if (i + 1 < d) v[i + 1] = rad * std::sin(kTwoPi * u[i + 1]);
    }
    v.normalize();
  }
  return v;
}

// Maps unit-cube coordinates onto a sampling domain.
class Domain {
 public:
  enum class Shape { cube, ball, annulus };

  static Domain cube(int d, double lo, double hi) { return Domain(Shape::cube, d, Vec::Zero(d), lo, hi); }
  static Domain ball(const Vec& center, double radius) { return Domain(Shape::ball, static_cast<int>(center.size()), center, 0.0, radius); }
  static Domain annulus(int d, double r_in, double r_out) { return Domain(Shape::annulus, d, Vec::Zero(d), r_in, r_out); }

  int dim() const { return d_; }
  int coords() const { return shape_ == Shape::cube ? d_ : direction_coords(d_) + 1; }
  double scale() const { return shape_ == Shape::cube ? b_ - a_ : shape_ == Shape::ball ? 2.0 * b_ : b_ - a_; }

  Vec map(const double* u) const {
    if (shape_ == Shape::cube) {
      Vec x(d_);
      for (int i = 0; i < d_; ++i) x[i] = a_ + (b_ - a_) * u[i];
      return x;
    }
    const Vec dir = direction_from(d_, u);
    const double t = u[direction_coords(d_)];
    const double r = shape_ == Shape::ball ? b_ * std::pow(t, 1.0 / d_) : a_ + (b_ - a_) * (1.0 - t);
    return center_ + r * dir;
  }

  bool contains(const Vec& x) const {
    if (shape_ == Shape::cube) return (x.array() >= a_).all() && (x.array() <= b_).all();
    const double r = (x - center_).norm();
    return shape_ == Shape::ball ? r <= b_ : (r > a_ && r <= b_);
  }

 private:
  Domain(Shape s, int d, Vec c, double a, double b) : shape_(s), d_(d), center_(std::move(c)), a_(a), b_(b) {}
  Shape shape_;
  int d_;
  Vec center_;
  double a_, b_;
};

struct PairSearch {
  double max_quotient = -std::numeric_limits<double>::infinity();
  Vec x, y;
  std::size_t evaluated = 0;
};

// Maximizes the monotonicity quotient over pairs in `domain`: randomized (Cranley-Patterson
// shifted) Halton pairs, half of them near-diagonal, then 10 rounds of local refinement
// around the running maximizer.
PairSearch search_max_quotient(const DriftField& field, const Domain& domain, std::size_t n_pairs,
                               std::uint64_t seed, double min_separation = 0.0) {
  const int d = domain.dim();
  const int c = domain.coords();
  const int ndims = 2 * c + 1;
  std::mt19937_64 rng(mix64(seed));
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> shift(static_cast<std::size_t>(ndims));
  for (auto& s : shift) s = unif(rng);
  std::vector<double> u(static_cast<std::size_t>(ndims));

  PairSearch best;
  auto consider = [&](const Vec& x, const Vec& y) {
    if (!domain.contains(x) || !domain.contains(y)) return;
    const double sep = (x - y).norm();
    if (!(sep > 0.0) || sep < min_separation) return;
    ++best.evaluated;
    const double q = monotonicity_quotient(field, x, y);
    if (q > best.max_quotient) {
      best.max_quotient = q;
      best.x = x;
      best.y = y;
    }
  };

  const double scale = domain.scale();
  for (std::size_t i = 0; i < n_pairs; ++i) {
    for (int j = 0; j < ndims; ++j) {
      const double v = radical_inverse(i + 1, nth_prime(j)) + shift[static_cast<std::size_t>(j)];
      u[static_cast<std::size_t>(j)] = std::clamp(v - std::floor(v), 1e-12, 1.0 - 1e-12);
    }
    const Vec x = domain.map(u.data());
    if (i % 2 == 0) {
      consider(x, domain.map(u.data() + c));
    } else {
      const Vec dir = direction_from(d, u.data() + c);
      const double s = scale * std::pow(10.0, -4.0 * u[static_cast<std::size_t>(2 * c)]);
      const Vec y = x + s * dir;
      consider(x, domain.contains(y) ? y : Vec(x - s * dir));
    }
  }
  if (best.x.size() == 0) return best;

  std::normal_distribution<double> normal(0.0, 1.0);
  const std::size_t per_round = std::max<std::size_t>(200, n_pairs / 100);
  auto noise = [&] {
    Vec v(d);
    for (int i = 0; i < d; ++i) v[i] = normal(rng);
    return v;
  };
  for (int round = 0; round < 10; ++round) {
    const double rho = 0.2 * scale * std::pow(0.5, round);
    for (std::size_t i = 0; i < per_round; ++i) {
      const Vec bx = best.x, by = best.y;
      if (i % 2 == 0) {
        consider(bx + rho * noise(), by + rho * noise());
      } else {
        const Vec mid = 0.5 * (bx + by) + rho * noise();
        const Vec half = 0.5 * (bx - by) * (0.1 + 0.9 * unif(rng));
        consider(mid + half, mid - half);
      }
    }
  }
  return best;
}

std::vector<std::int64_t> checkpoint_indices(std::vector<double>& checkpoints, double T, double dt) {
  const WienerPath grid(0, 1, dt, 0, 0);
  const std::int64_t n_total = grid.index_of(T);
  if (n_total < 0) throw DomainError("T must be non-negative");
  std::sort(checkpoints.begin(), checkpoints.end());
  checkpoints.erase(std::unique(checkpoints.begin(), checkpoints.end()), checkpoints.end());
  std::vector<std::int64_t> idx;
  for (double t : checkpoints) {
    const std::int64_t k = grid.index_of(t);
    if (k < 0 || k > n_total) throw WindowError("checkpoint outside [0, T]");
    idx.push_back(k);
  }
  return idx;
}

struct SeedTrace {
  std::vector<double> values;
  bool exploded = false;
};

template <class Stat>
SyncReport ensemble_report(const DriftField& field, double sigma, const Points& start, double T,
                           std::size_t n_seeds, std::vector<double> checkpoints, double epsilon,
                           const EnsembleOptions& opt, Stat&& statistic, std::string label) {
  const double dt = opt.integrator.dt;
  const std::vector<std::int64_t> idx = checkpoint_indices(checkpoints, T, dt);
  const std::int64_t n_total = idx.empty() ? 0 : idx.back();
  auto run_seed = [&](std::size_t i) {
    const WienerPath path(member_seed(opt.base_seed, i), field.noise_dim(), dt, 0, std::max<std::int64_t>(n_total, 0));
    Stepper stepper(field, opt.integrator, sigma);
    Points states = start;
    for (auto& s : states) wrap_state(field, s);
    std::vector<char> exploded(states.size(), 0);
    SeedTrace trace;
    std::int64_t k = 0;
    for (std::int64_t target : idx) {
      advance_ensemble(stepper, path, states, exploded, k, target);
      k = target;
      trace.values.push_back(statistic(states));
    }
    trace.exploded = std::any_of(exploded.begin(), exploded.end(), [](char e) { return e != 0; });
    return trace;
  };
  const std::vector<SeedTrace> traces = parallel_map(n_seeds, opt.workers, run_seed);

  SyncReport rep;
  rep.statistic = std::move(label);
  rep.checkpoints = checkpoints;
  rep.ensemble_size = n_seeds;
  rep.epsilon = epsilon;
  for (const auto& tr : traces) rep.exploded += tr.exploded ? 1 : 0;
  for (std::size_t c = 0; c < idx.size(); ++c) {
    std::vector<double> dist;
    for (const auto& tr : traces)
      if (!tr.exploded) dist.push_back(tr.values[c]);
    QuantileRow row;
    if (!dist.empty()) {
      row = {quantile(dist, 0.05), quantile(dist, 0.25), quantile(dist, 0.5), quantile(dist, 0.75),
             quantile(dist, 0.95), *std::max_element(dist.begin(), dist.end()),
             *std::min_element(dist.begin(), dist.end())};
    }
    const auto exceed = static_cast<std::size_t>(std::count_if(dist.begin(), dist.end(), [&](double v) { return v > epsilon; }));
    rep.exceed_prob.push_back(dist.empty() ? 0.0 : static_cast<double>(exceed) / static_cast<double>(dist.size()));
    rep.exceed_ci.push_back(wilson_interval(exceed, dist.size()));
    rep.distance_quantiles.push_back(row);
    rep.distances.push_back(std::move(dist));
  }
  return rep;
}

double max_pairwise(const DriftField& field, const Points& pts) {
  double m = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j) m = std::max(m, chart_distance(field, pts[i], pts[j]));
  return m;
}

}  // namespace

Points ball_mesh(const Vec& center, double radius, int n) {
  if (n < 1) throw DomainError("mesh needs at least one point");
  if (!(radius >= 0.0)) throw DomainError("mesh radius must be non-negative");
  const int d = static_cast<int>(center.size());
  Points pts{center};
  const int n_sphere = (n - 1 + 1) / 2;
  const int n_inner = n - 1 - n_sphere;
  for (int i = 0; i < n_sphere; ++i) {
    Vec dir(d);
    if (d == 1) {
      dir[0] = i % 2 == 0 ? 1.0 : -1.0;
    } else if (d == 2) {
      const double th = kTwoPi * i / n_sphere;
      dir << std::cos(th), std::sin(th);
    } else {
      std::vector<double> u(static_cast<std::size_t>(direction_coords(d)));
      for (std::size_t j = 0; j < u.size(); ++j) u[j] = radical_inverse(static_cast<std::uint64_t>(i) + 1, nth_prime(static_cast<int>(j)));
      dir = direction_from(d, u.data());
    }
    pts.push_back(center + radius * dir);
  }
  const Domain inner = Domain::ball(center, radius);
  std::vector<double> u(static_cast<std::size_t>(inner.coords()));
  for (int i = 0; i < n_inner; ++i) {
    for (std::size_t j = 0; j < u.size(); ++j)
      u[j] = std::max(1e-12, radical_inverse(static_cast<std::uint64_t>(i) + 1, nth_prime(static_cast<int>(j))));
    pts.push_back(inner.map(u.data()));
  }
  return pts;
}

SyncReport two_point_sync(const DriftField& field, double sigma, const Vec& x, const Vec& y, double T,
                          std::size_t n_seeds, std::vector<double> checkpoints, double epsilon,
                          const EnsembleOptions& options) {
  if (x.size() != field.dim() || y.size() != field.dim()) throw DomainError("points have the wrong dimension");
  return ensemble_report(
      field, sigma, Points{x, y}, T, n_seeds, std::move(checkpoints), epsilon, options,
      [&](const Points& s) { return chart_distance(field, s[0], s[1]); },
      "two-point distance d(phi_t(w,x), phi_t(w,y)) (synchronization in probability)");
}

SyncReport ball_diameter(const DriftField& field, double sigma, const Vec& center, double radius, int mesh_n,
                         double T, std::size_t n_seeds, std::vector<double> checkpoints, double epsilon,
                         const EnsembleOptions& options) {
  if (center.size() != field.dim()) throw DomainError("center has the wrong dimension");
  SyncReport rep = ensemble_report(
      field, sigma, ball_mesh(center, radius, mesh_n), T, n_seeds, std::move(checkpoints), epsilon, options,
      [&](const Points& s) { return max_pairwise(field, s); },
      "mesh diameter of phi_t(w, B(center, radius)) (asymptotic stability on a ball; not weak asymptotic "
      "stability on a positive-measure set)");
  if (!rep.checkpoints.empty() && n_seeds > 0) {
    const auto& last = rep.distances.back();
    const auto below = std::count_if(last.begin(), last.end(), [&](double v) { return v < epsilon; });
    rep.final_fraction_below = static_cast<double>(below) / static_cast<double>(n_seeds);
  }
  return rep;
}

PullbackEnsemble pullback_ensemble(const DriftField& field, double sigma, std::uint64_t seed, const Points& init,
                                   const std::vector<double>& t_list, const IntegratorSpec& integrator) {
  PullbackEnsemble out;
  out.seed = seed;
  out.times = t_list;
  double t_max = 0.0;
  for (double t : t_list) {
    if (t < 0.0) throw DomainError("pullback times must be non-negative");
    t_max = std::max(t_max, t);
  }
  const WienerPath path = sample_path(seed, field.noise_dim(), integrator.dt, -t_max, 0.0);
  for (double t : t_list) {
    const std::int64_t n = path.index_of(t);
    const WienerPath shifted = path.shift_steps(-n);
    EnsembleEnd end = evolve_ensemble(field, integrator, sigma, shifted, init, 0.0, t);
    out.endpoints.push_back(std::move(end.endpoints));
    out.exploded.push_back(std::move(end.exploded));
  }
  return out;
}

double default_linkage_epsilon(double sigma, double dt) { return 20.0 * sigma * std::sqrt(dt); }

ClusterReport cluster_count(const Points& points, double linkage_epsilon, Metric metric) {
  ClusterReport rep;
  rep.points = points;
  rep.linkage_epsilon = linkage_epsilon;
  const std::size_t n = points.size();
  if (n == 0) throw DomainError("cluster_count needs at least one point");
  auto dist = [&](const Vec& a, const Vec& b) {
    if (metric == Metric::euclidean) return (a - b).norm();
    double s = 0.0;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
      const double d = std::remainder(a[i] - b[i], kTwoPi);
      s += d * d;
    }
    return std::sqrt(s);
  };
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (dist(points[i], points[j]) <= linkage_epsilon) {
        const std::size_t a = find(i), b = find(j);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
      }
  std::vector<std::size_t> label_of_root(n, n);
  rep.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t r = find(i);
    if (label_of_root[r] == n) label_of_root[r] = rep.cluster_count++;
    rep.labels[i] = label_of_root[r];
  }
  const auto d = points.front().size();
  rep.sizes.assign(rep.cluster_count, 0);
  Points sum(rep.cluster_count, Vec::Zero(d)), sum_sin(rep.cluster_count, Vec::Zero(d));
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t l = rep.labels[i];
    ++rep.sizes[l];
    if (metric == Metric::euclidean) {
      sum[l] += points[i];
    } else {
      sum[l] += points[i].array().cos().matrix();
      sum_sin[l] += points[i].array().sin().matrix();
    }
  }
  for (std::size_t l = 0; l < rep.cluster_count; ++l) {
    Vec c(d);
    if (metric == Metric::euclidean) {
      c = sum[l] / static_cast<double>(rep.sizes[l]);
    } else {
      for (Eigen::Index i = 0; i < d; ++i) {
        double a = std::atan2(sum_sin[l][i], sum[l][i]);
        if (a < 0.0) a += kTwoPi;
        c[i] = a;
      }
    }
    rep.centers.push_back(c);
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (rep.labels[i] == rep.labels[j])
        rep.max_intra_cluster_diameter = std::max(rep.max_intra_cluster_diameter, dist(points[i], points[j]));
  return rep;
}

std::string_view to_string(ConditionKind kind) {
  switch (kind) {
    case ConditionKind::one_sided_lipschitz: return "one_sided_lipschitz";
    case ConditionKind::eventual_monotone: return "eventual_monotone";
    case ConditionKind::monotone_large_sets: return "monotone_large_sets";
    case ConditionKind::gradient_direction: return "gradient_direction";
  }
  return "?";
}

std::string_view to_string(Verdict verdict) {
  switch (verdict) {
    case Verdict::satisfied_empirically: return "satisfied_empirically";
    case Verdict::violated_with_witness: return "violated_with_witness";
    case Verdict::inconclusive: return "inconclusive";
  }
  return "?";
}

double monotonicity_quotient(const DriftField& field, const Vec& x, const Vec& y) {
  const Vec diff = x - y;
  return (eval_drift(field, x) - eval_drift(field, y)).dot(diff) / diff.squaredNorm();
}

namespace {

// Slack for comparing a sampled quotient against a declared constant.
double slack(double lambda) { return 1e-9 * (1.0 + std::abs(lambda)); }

}  // namespace

bool replay_violation(const DriftField& field, const ConditionReport& report) {
  if (report.verdict != Verdict::violated_with_witness || report.witness.size() < 2) return false;
  const double q = monotonicity_quotient(field, report.witness[0], report.witness[1]);
  switch (report.kind) {
    case ConditionKind::one_sided_lipschitz: {
      const double lambda = report.constants.at("declared_lambda");
      return q > lambda + slack(lambda);
    }
    case ConditionKind::eventual_monotone: return q >= 0.0;
    default: return false;
  }
}

ConditionReport check_one_sided_lipschitz(const DriftField& field, const Box& box, std::size_t n_pairs,
                                          std::uint64_t seed) {
  if (n_pairs < 1) throw DomainError("n_pairs must be at least 1");
  const PairSearch s = search_max_quotient(field, Domain::cube(field.dim(), box.lo, box.hi), n_pairs, seed);
  ConditionReport rep;
  rep.kind = ConditionKind::one_sided_lipschitz;
  rep.samples_used = s.evaluated;
  rep.constants["lambda_hat"] = s.max_quotient;
  if (s.evaluated == 0) {
    rep.note = "no admissible pairs sampled";
    return rep;
  }
  rep.witness = {s.x, s.y};
  if (const auto declared = field.one_sided_constant()) {
    rep.constants["declared_lambda"] = *declared;
    if (s.max_quotient <= *declared + slack(*declared)) {
      rep.verdict = Verdict::satisfied_empirically;
    } else {
      rep.verdict = Verdict::violated_with_witness;
      rep.note = "sampled quotient exceeds the declared constant";
    }
  } else {
    rep.verdict = Verdict::satisfied_empirically;
    rep.note = "no declared constant; lambda_hat is the empirical constant on the box";
  }
  return rep;
}

ConditionReport check_eventual_monotone(const DriftField& field, double R, std::size_t n_pairs, std::uint64_t seed) {
  if (!(R > 0.0)) throw DomainError("R must be positive");
  if (n_pairs < 1) throw DomainError("n_pairs must be at least 1");
  const PairSearch s = search_max_quotient(field, Domain::annulus(field.dim(), R, 4.0 * R), n_pairs, seed);
  ConditionReport rep;
  rep.kind = ConditionKind::eventual_monotone;
  rep.samples_used = s.evaluated;
  rep.constants["R"] = R;
  rep.constants["max_quotient"] = s.max_quotient;
  rep.constants["lambda1_hat"] = -s.max_quotient;
  if (s.evaluated == 0) return rep;
  rep.witness = {s.x, s.y};
  rep.verdict = -s.max_quotient > 0.0 ? Verdict::satisfied_empirically : Verdict::violated_with_witness;
  return rep;
}

ConditionReport check_monotone_on_large_sets(const DriftField& field, double r, const Points& z_candidates,
                                             std::size_t n_pairs, std::uint64_t seed) {
  if (!(r > 0.0)) throw DomainError("r must be positive");
  ConditionReport rep;
  rep.kind = ConditionKind::monotone_large_sets;
  rep.constants["r"] = r;
  double best_q = std::numeric_limits<double>::infinity();
  Vec best_z;
  for (const auto& z : z_candidates) {
    if (z.size() != field.dim()) throw DomainError("candidate center has the wrong dimension");
    const PairSearch s = search_max_quotient(field, Domain::ball(z, 3.0 * r), n_pairs, seed);
    rep.samples_used += s.evaluated;
    if (s.evaluated > 0 && s.max_quotient < best_q) {
      best_q = s.max_quotient;
      best_z = z;
    }
    if (s.evaluated > 0 && s.max_quotient < 0.0) {
      rep.verdict = Verdict::satisfied_empirically;
      rep.witness = {z};
      rep.constants["max_quotient"] = s.max_quotient;
      return rep;
    }
  }
  rep.verdict = Verdict::inconclusive;
  if (best_z.size() > 0) {
    rep.witness = {best_z};
    rep.constants["max_quotient"] = best_q;
  }
  rep.note = "no candidate center with strictly negative sampled quotient on B(z, 3r)";
  return rep;
}

ConditionReport gradient_direction_search(const DriftField& field, const Vec& v, const Points& z_grid) {
  if (v.size() != field.dim()) throw DomainError("v has the wrong dimension");
  if (v.squaredNorm() == 0.0) throw DomainError("v must be non-zero");
  ConditionReport rep;
  rep.kind = ConditionKind::gradient_direction;
  double best = std::numeric_limits<double>::infinity();
  for (const auto& z : z_grid) {
    const double q = (eval_drift(field, z) - eval_drift(field, Vec(z - v))).dot(v);
    ++rep.samples_used;
    best = std::min(best, q);
    if (q < 0.0) {
      rep.verdict = Verdict::satisfied_empirically;
      rep.witness = {z, v};
      rep.constants["value"] = q;
      return rep;
    }
  }
  rep.verdict = Verdict::inconclusive;
  if (std::isfinite(best)) rep.constants["min_value"] = best;
  return rep;
}

SwiftControlResult swift_control(const DriftField& field, double sigma, const Vec& x, double r, const Vec& z,
                                 double t0, double delta, const SwiftControlOptions& opt) {
  const int d = field.dim();
  if (!field.additive_noise()) throw DomainError("swift_control requires additive noise");
  if (x.size() != d || z.size() != d) throw DomainError("x and z must have dimension d");
  if (!(sigma > 0.0) || !(r >= 0.0) || !(delta > 0.0)) throw DomainError("need sigma > 0, r >= 0, delta > 0");
  if (opt.n_steps < 1) throw DomainError("n_steps must be at least 1");

  SwiftControlResult res;
  const double reach = r + z.norm() + 1.0;
  for (const auto& p : ball_mesh(x, reach, opt.bound_samples)) res.B = std::max(res.B, eval_drift(field, p).norm());
  res.T0 = res.B > 0.0 ? std::min(std::min(delta, 1.0) / (4.0 * res.B), 1.0) : 1.0;
  res.t0 = t0 > 0.0 ? t0 : res.T0;
  if (res.t0 > res.T0 * (1.0 + 1e-12))
    throw DomainError("t0 = " + std::to_string(res.t0) + " exceeds T0 = " + std::to_string(res.T0));
  res.dt = res.t0 / opt.n_steps;

  // f(t) = (psi(t) - x - int_0^t b(psi(s)) ds) / sigma, the integral by 8-point Gauss per step.
  std::vector<double> gn, gw;
  gauss_legendre(8, gn, gw);
  auto psi = [&](double t) -> Vec { return x + (t / res.t0) * z; };
  Vec integral = Vec::Zero(d);
  for (int n = 0; n <= opt.n_steps; ++n) {
    const double t = n * res.dt;
    if (n > 0) {
      const double mid = t - 0.5 * res.dt;
      for (std::size_t i = 0; i < gn.size(); ++i)
        integral += 0.5 * res.dt * gw[i] * eval_drift(field, psi(mid + 0.5 * res.dt * gn[i]));
    }
    res.times.push_back(t);
    res.control.push_back((psi(t) - x - integral) / sigma);
  }

  IntegratorSpec spec;
  spec.scheme = opt.scheme;
  spec.dt = res.dt;
  Stepper stepper(field, spec, sigma);
  auto drive = [&](const Vec& start) {
    Vec y = start;
    for (int n = 0; n < opt.n_steps; ++n) {
      const Vec df = res.control[static_cast<std::size_t>(n + 1)] - res.control[static_cast<std::size_t>(n)];
      if (!stepper.step(y, df)) throw NumericRangeError("controlled trajectory exploded");
    }
    return y;
  };
  res.residual = (drive(x) - (x + z)).norm();
  res.mesh = ball_mesh(x, r, opt.mesh_n);
  for (const auto& start : res.mesh) res.mesh_max_error = std::max(res.mesh_max_error, (drive(start) - (start + z)).norm());
  res.all_within_delta = res.mesh_max_error < delta;
  return res;
}

ContractionWitness contraction_witness(const DriftField& field, double sigma, double R, const Vec& z,
                                       double c_estimate, const ContractionOptions& opt) {
  if (!field.additive_noise()) throw DomainError("contraction_witness requires additive noise");
  if (!(R > 0.0) || !(sigma > 0.0)) throw DomainError("need R > 0 and sigma > 0");
  if (z.size() != field.dim()) throw DomainError("z has the wrong dimension");
  ContractionWitness w;
  w.c = c_estimate;
  if (!(w.c > 0.0)) {
    const PairSearch s = search_max_quotient(field, Domain::ball(z, 2.0 * R), opt.n_pairs, opt.seed, R / 9.0);
    w.c = -s.max_quotient;
    if (!(w.c > 0.0)) throw DomainError("no contraction: sampled quotient on B(z, 2R) is not negative");
  }
  const double dt = opt.integrator.dt;
  const auto steps = static_cast<std::int64_t>(std::ceil(std::log(9.0) / w.c / dt - 1e-9));
  w.T0 = static_cast<double>(steps) * dt;
  // Constant increments of omega0 freeze z: sigma * d(omega0) = -b(z) dt.
  const Vec dw = -dt * eval_drift(field, z) / sigma;
  Stepper stepper(field, opt.integrator, sigma);
  for (const auto& start : ball_mesh(z, R, opt.mesh_n)) {
    Vec y = start;
    for (std::int64_t k = 0; k < steps; ++k)
      if (!stepper.step(y, dw)) throw NumericRangeError("controlled trajectory exploded");
    w.endpoints.push_back(y);
  }
  w.ratio = max_pairwise(field, w.endpoints) / (2.0 * R);
  w.satisfied = w.ratio <= 0.25;
  return w;
}

}  // namespace rdsync
