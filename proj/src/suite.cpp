#include "rdsync/suite.hpp"

#include "rdsync/diagnostics.hpp"
#include "rdsync/error.hpp"
#include "rdsync/lyapunov.hpp"
#include "rdsync/measure.hpp"
#include "rdsync/noise.hpp"
#include "rdsync/parallel.hpp"
#include "rdsync/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <ostream>
#include <random>
#include <sstream>

namespace fs = std::filesystem;

namespace rdsync {

bool SuiteResult::all_passed() const {
  return !rows.empty() && std::all_of(rows.begin(), rows.end(), [](const SuiteRow& r) { return r.passed; });
}

namespace {

// Pinned tolerances.
constexpr double kA1Tol = 0.05;
constexpr double kA1MaxSeconds = 60.0;
constexpr double kA2SeFactor = 3.0;
constexpr double kA2GridTol = 1e-6;
constexpr double kA3SeFactor = 3.0;
constexpr double kA5Epsilon = 0.05;
constexpr double kA5MaxExceed = 0.05;
constexpr double kA8Tol = 1e-6;
constexpr double kA9MinFraction = 0.95;
constexpr double kA9AntipodalTol = 0.1;
constexpr double kA11Delta = 0.1;
constexpr double kA11ResidualPerDt = 5.0;
constexpr double kA12MaxRatio = 0.25;

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s << std::setprecision(precision) << v;
  return s.str();
}

Vec vec(std::initializer_list<double> v) {
  Vec out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

DriftField builtin(FieldKind kind, int dim = 0) {
  BuiltinSpec s;
  s.kind = kind;
  s.dim = dim;
  return build(s);
}

bool same_bits(const Vec& a, const Vec& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

struct Outcome {
  bool passed;
  std::string detail;
};

Outcome a1(int workers) {
  const auto start = std::chrono::steady_clock::now();
  const auto results = parallel_map(2, workers, [](std::size_t i) {
    const int d = i == 0 ? 1 : 3;
    LyapunovOptions o;
    o.k = d;
    o.T = 200.0;
    o.dt = 1e-3;
    return spectrum_benettin(builtin(FieldKind::ou, d), 1.0, 101 + i, Vec::Constant(d, 0.5), o);
  });
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  double worst = 0.0;
  for (const auto& r : results)
    for (double e : r.exponents) worst = std::max(worst, std::abs(e + 1.0));
  return {worst <= kA1Tol && seconds < kA1MaxSeconds,
          "max |lambda_i + 1| = " + fmt(worst) + " (d=1,3), " + fmt(seconds, 3) + " s"};
}

Outcome a2(int workers) {
  const std::vector<double> sigmas{0.5, 1.0, 2.0};
  const auto f = builtin(FieldKind::double_well, 1);
  const auto tops = parallel_map(sigmas.size(), workers, [&](std::size_t i) {
    LyapunovOptions o;
    o.T = 1000.0;
    return spectrum_benettin(f, sigmas[i], 201 + i, Vec::Constant(1, 0.5), o);
  });
  bool ok = true;
  std::string detail;
  for (std::size_t i = 0; i < sigmas.size(); ++i) {
    const auto g = normalize(f, sigmas[i]);
    const auto q = gradient_1d_exponent(f, g);
    GibbsOptions finer;
    finer.box = g.box();
    finer.points_per_axis = 2 * g.grid_points_per_axis() - 1;
    const auto q2 = gradient_1d_exponent(f, normalize(f, sigmas[i], finer));
    const double grid_shift = std::max(q.error, std::abs(q2.value - q.value));
    const double se = std::hypot(tops[i].top_se(), q.error);
    const bool pass = std::abs(tops[i].top() - q.value) <= kA2SeFactor * se && grid_shift <= kA2GridTol;
    ok = ok && pass;
    detail += "s=" + fmt(sigmas[i], 2) + ": " + fmt(tops[i].top()) + " vs " + fmt(q.value) + " (se " +
              fmt(se, 2) + ", grid " + fmt(grid_shift, 2) + "); ";
  }
  return {ok, detail};
}

Outcome a3(int workers) {
  struct Case {
    DriftField f;
    double sigma;
    std::string name;
  };
  const std::vector<Case> cases{{builtin(FieldKind::double_well, 2), 1.0, "dw"},
                                {builtin(FieldKind::double_well, 2), 3.0, "dw"},
                                {builtin(FieldKind::v_e), 1.0, "v_e"},
                                {builtin(FieldKind::v_e), 3.0, "v_e"}};
  const auto tops = parallel_map(cases.size(), workers, [&](std::size_t i) {
    LyapunovOptions o;
    o.T = 400.0;
    return spectrum_benettin(cases[i].f, cases[i].sigma, 301 + i, Vec::Constant(2, 0.5), o);
  });
  bool ok = true;
  std::string detail;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const auto b = lambda_plus_bound(cases[i].f, normalize(cases[i].f, cases[i].sigma));
    const double se = std::hypot(tops[i].top_se(), b.error);
    const bool pass = tops[i].top() <= b.value + kA3SeFactor * se;
    ok = ok && pass;
    detail += cases[i].name + " s=" + fmt(cases[i].sigma, 2) + ": " + fmt(tops[i].top()) + " <= " + fmt(b.value) +
              " (se " + fmt(se, 2) + "); ";
  }
  return {ok, detail};
}

Outcome a4() {
  bool ok = true;
  std::string detail;
  for (int d : {1, 2}) {
    BuiltinSpec s;
    s.kind = FieldKind::radial_polynomial;
    s.dim = d;
    s.coefficients = {0.0, -0.5, 0.25};  // (|x|^2 - 1)^2 / 4, the double well
    const auto f = build(s);
    detail += "d=" + std::to_string(d) + ":";
    for (double sigma : {0.5, 1.0, 2.0, 4.0}) {
      const auto b = lambda_plus_bound(f, normalize(f, sigma));
      ok = ok && b.value + b.error < 0.0;
      detail += " " + fmt(b.value);
    }
    detail += "; ";
  }
  return {ok, detail};
}

Outcome a5(int workers) {
  const auto f = builtin(FieldKind::double_well, 2);
  EnsembleOptions o;
  o.base_seed = 501;
  o.workers = workers;
  const Vec x = vec({1, 0}), y = vec({-1, 0});
  const auto r = two_point_sync(f, 1.0, x, y, 100.0, 200, {10.0, 50.0, 100.0}, kA5Epsilon, o);
  const auto r0 = two_point_sync(f, 0.0, x, y, 100.0, 4, {10.0, 50.0, 100.0}, kA5Epsilon, o);
  bool exact = true;
  for (const auto& q : r0.distance_quantiles) exact = exact && q.min == 2.0 && q.max == 2.0;
  const double p = r.exceed_prob.back();
  return {p <= kA5MaxExceed && exact && r.exploded == 0,
          "P[d > 0.05 at T=100] = " + fmt(p) + " over " + std::to_string(r.ensemble_size) + " seeds (exploded " +
              std::to_string(r.exploded) + "); sigma=0 distance " + (exact ? "exactly 2" : "drifted")};
}

Outcome a6() {
  std::mt19937_64 rng(606);
  BuiltinSpec radial;
  radial.kind = FieldKind::radial_polynomial;
  radial.dim = 2;
  radial.coefficients = {0.0, -0.5, 0.25};
  BuiltinSpec linear;
  linear.kind = FieldKind::linear;
  linear.matrix = Mat{{-1.0, 0.5}, {-0.3, -2.0}};
  const std::vector<DriftField> fields{builtin(FieldKind::ou, 1),        builtin(FieldKind::ou, 3),
                                       builtin(FieldKind::double_well, 1), builtin(FieldKind::double_well, 2),
                                       builtin(FieldKind::v_e),          builtin(FieldKind::v_s),
                                       build(radial),                    build(linear),
                                       builtin(FieldKind::circle_stratonovich)};
  const Scheme schemes[] = {Scheme::euler_maruyama, Scheme::tamed_euler, Scheme::split_step_implicit};
  std::size_t failures = 0;
  const int n = 1000;
  std::normal_distribution<double> normal;
  for (int rep = 0; rep < n; ++rep) {
    const auto& f = fields[rng() % fields.size()];
    IntegratorSpec spec;
    spec.scheme = schemes[rng() % 3];
    spec.dt = rep % 2 == 0 ? 1e-3 : 1.0 / 1024.0;
    const double sigma = 0.25 + 1.75 * std::uniform_real_distribution<double>()(rng);
    const std::int64_t ns = 1 + static_cast<std::int64_t>(rng() % 200), nt = 1 + static_cast<std::int64_t>(rng() % 200);
    const auto p = sample_path(rng(), f.noise_dim(), spec.dt, -1.0, static_cast<double>(ns + nt) * spec.dt);
    Vec x0(f.dim());
    for (Eigen::Index i = 0; i < x0.size(); ++i) x0[i] = 1.5 * normal(rng);
    const double s = static_cast<double>(ns) * spec.dt, t = static_cast<double>(nt) * spec.dt;
    const Vec direct = evolve(f, spec, sigma, p, x0, 0.0, s + t, 0).end();
    const Vec mid = evolve(f, spec, sigma, p, x0, 0.0, s, 0).end();
    const Vec split = evolve(f, spec, sigma, p.shift_steps(ns), mid, 0.0, t, 0).end();
    if (!same_bits(direct, split)) ++failures;
  }
  return {failures == 0, std::to_string(n) + " cases, " + std::to_string(failures) + " failures"};
}

Outcome a7() {
  std::mt19937_64 rng(707);
  const double deltas[] = {0.1, 0.01, 1e-3, 1.0 / 64.0};
  std::size_t failures = 0;
  const int n = 1000;
  for (int rep = 0; rep < n; ++rep) {
    const std::uint64_t seed = rng();
    const int dim = 1 + static_cast<int>(rng() % 3);
    const double delta = deltas[rng() % 4];
    const std::int64_t L = 400;
    const auto p = sample_path(seed, dim, delta, -static_cast<double>(L) * delta, static_cast<double>(L) * delta);
    auto pick = [&](std::int64_t lo, std::int64_t hi) { return lo + static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(hi - lo + 1)); };
    const std::int64_t s = pick(-100, 100), u = pick(-100, 100), k = pick(-100, 100);
    bool ok = true;
    // Group property: theta_u theta_s = theta_{s+u}.
    ok = ok && same_bits(p.shift_steps(s).shift_steps(u).value_at(k), p.shift_steps(s + u).value_at(k));
    // theta_s W(t) = W(t + s) - W(s).
    ok = ok && same_bits(p.shift_steps(s).value_at(k), Vec(p.value_at(k + s) - p.value_at(s)));
    ok = ok && same_bits(p.shift_steps(0).value_at(k), p.value_at(k));
    // Increments depend only on (seed, absolute index, component).
    const auto q = sample_path(seed, dim, delta, -static_cast<double>(L) * delta, static_cast<double>(L) * delta);
    for (int c = 0; c < dim; ++c) {
      const double a = p.increment(k, c), b = q.increment(k, c), shifted = p.shift_steps(s).increment(k, c);
      ok = ok && std::memcmp(&a, &b, sizeof a) == 0;
      const double direct = p.increment(k + s, c);
      ok = ok && std::memcmp(&shifted, &direct, sizeof a) == 0;
    }
    if (!ok) ++failures;
  }
  return {failures == 0, std::to_string(n) + " cases, " + std::to_string(failures) + " failures"};
}

Outcome a8() {
  double worst = 0.0;
  for (int d : {1, 2}) {
    const auto f = builtin(FieldKind::ou, d);
    for (double sigma : {0.5, 1.0, 2.0}) {
      const auto g = normalize(f, sigma);
      const double s2 = sigma * sigma;
      worst = std::max(worst, std::abs(g.Z() - std::pow(kPi * s2, d / 2.0)));
      for (int i = 0; i < d; ++i)
        worst = std::max(worst, std::abs(g.expect([i](const Vec& x) { return x[i] * x[i]; }).value - s2 / 2.0));
      for (double R : {0.5, 1.0, 2.0}) {
        const double exact = d == 1 ? std::erf(R / sigma) : 1.0 - std::exp(-R * R / s2);
        worst = std::max(worst, std::abs(g.ball_mass(R).value - exact));
      }
    }
  }
  return {worst <= kA8Tol, "max abs error " + fmt(worst, 3) + " over Z, E x_i^2, ball masses (d=1,2)"};
}

Outcome a9(int workers) {
  const auto f = builtin(FieldKind::circle_stratonovich);
  const int n_angles = 200;
  Points init;
  for (int i = 0; i < n_angles; ++i) init.push_back(Vec::Constant(1, kTwoPi * i / n_angles));
  IntegratorSpec spec;
  spec.scheme = Scheme::euler_maruyama;
  spec.dt = 1e-3;
  const double sigma = 1.0;
  const double eps = default_linkage_epsilon(sigma, spec.dt);
  const std::size_t n_seeds = 100;
  const auto reports = parallel_map(n_seeds, workers, [&](std::size_t i) {
    const auto pe = pullback_ensemble(f, sigma, member_seed(909, i), init, {30.0}, spec);
    return cluster_count(pe.endpoints.back(), eps, Metric::arc);
  });
  std::size_t good = 0;
  double worst_gap = 0.0;
  for (const auto& r : reports) {
    if (r.cluster_count != 2) continue;
    const double gap = std::abs(chart_distance(f, r.centers[0], r.centers[1]) - kPi);
    worst_gap = std::max(worst_gap, gap);
    if (gap <= kA9AntipodalTol) ++good;
  }
  const double fraction = static_cast<double>(good) / static_cast<double>(n_seeds);
  return {fraction >= kA9MinFraction, "two antipodal clusters in " + std::to_string(good) + "/" +
                                          std::to_string(n_seeds) + " seeds; max |gap - pi| = " + fmt(worst_gap, 3)};
}

Outcome a10() {
  bool ok = true;
  std::string detail;
  for (const auto& f : {builtin(FieldKind::v_e), builtin(FieldKind::double_well, 2)}) {
    double prev = 2.0;
    detail += f.name() + ":";
    for (double sigma : {1.0, 2.0, 4.0, 8.0}) {
      const auto m = normalize(f, sigma).ball_mass(2.0);
      ok = ok && m.value + m.error < prev;
      prev = m.value - m.error;
      detail += " " + fmt(m.value);
    }
    detail += "; ";
  }
  return {ok, detail};
}

Outcome a11() {
  const auto f = builtin(FieldKind::double_well, 2);
  const auto r = swift_control(f, 1.0, vec({-1, 0}), 0.1, vec({2, 0}), 0.0, kA11Delta);
  bool ok = r.all_within_delta && r.mesh.size() == 32;
  std::string detail = "mesh max error " + fmt(r.mesh_max_error, 3) + " (T0 " + fmt(r.T0, 3) + ");";
  BuiltinSpec zero;
  zero.kind = FieldKind::linear;
  zero.matrix = Mat::Zero(2, 2);
  const auto b0 = build(zero);
  const auto ou = builtin(FieldKind::ou, 2);
  for (int n : {100, 200, 400}) {
    SwiftControlOptions o;
    o.n_steps = n;
    const auto z = swift_control(b0, 1.0, vec({-1, 0}), 0.1, vec({2, 0}), 0.0, kA11Delta, o);
    const auto w = swift_control(ou, 1.0, vec({-1, 0}), 0.1, vec({2, 0}), 0.0, kA11Delta, o);
    ok = ok && z.residual <= kA11ResidualPerDt * z.dt && w.residual <= kA11ResidualPerDt * w.dt;
    detail += " dt=" + fmt(z.dt, 3) + ": b=0 " + fmt(z.residual, 2) + ", ou " + fmt(w.residual, 2) + ";";
  }
  return {ok, detail};
}

Outcome a12() {
  const auto w = contraction_witness(builtin(FieldKind::double_well, 2), 1.0, 1.0, vec({4, 0}), 0.0);
  return {w.ratio <= kA12MaxRatio, "c = " + fmt(w.c) + ", T0 = " + fmt(w.T0) + ", ratio = " + fmt(w.ratio, 3)};
}

Outcome a13(const SuiteOptions& options) {
  const fs::path root(options.scratch_dir);
  const std::string base = R"(
[field]
kind = "double_well"
dim = 2
[noise]
seed = 1313
sigma = 1.0
delta = 0.01
[integrator]
scheme = "split_step_implicit"
dt = 0.01
[run]
n_seeds = 3
t1 = 5
x0 = [[1.0, 0.0], [-1.0, 0.5]]
record_every = 10
[lyapunov]
k = 2
T = 20
[sync]
x = [1, 0]
y = [-1, 0]
T = 5
[diam]
radius = 1
mesh_n = 8
T = 5
[pullback]
times = [0, 1, 2]
n_init = 6
[cluster]
times = [2]
n_init = 6
)";
  const std::vector<std::string> cmds{"simulate", "lyapunov", "sync", "diam", "pullback", "cluster"};
  std::size_t mismatches = 0, files = 0;
  for (const auto& cmd : cmds) {
    Config cfg = Config::parse(base, "determinism");
    if (cmd == "sync" || cmd == "diam") cfg.set("run.n_seeds", 8);
    RunOptions a{cmd, (root / cmd / "a").string(), std::nullopt, 1};
    const RunManifest ma = run(cfg, a);
    RunOptions b{cmd, (root / cmd / "b").string(), std::nullopt, 3};
    const RunManifest mb = run(Config::load((root / cmd / "a" / "manifest.json").string()), b);
    if (ma.outputs.empty() || ma.outputs.size() != mb.outputs.size() || ma.config_hash != mb.config_hash) ++mismatches;
    for (std::size_t i = 0; i < std::min(ma.outputs.size(), mb.outputs.size()); ++i, ++files) {
      if (ma.outputs[i].name != mb.outputs[i].name || ma.outputs[i].sha256 != mb.outputs[i].sha256) ++mismatches;
    }
  }
  std::error_code ec;
  fs::remove_all(root, ec);
  return {mismatches == 0, std::to_string(cmds.size()) + " commands, " + std::to_string(files) +
                               " output files compared (workers 1 vs 3), " + std::to_string(mismatches) + " mismatches"};
}

}  // namespace

SuiteResult run_suite(const SuiteOptions& options, std::ostream& log) {
  const int w = std::max(1, options.workers);
  const std::vector<std::tuple<std::string, std::string, std::function<Outcome()>>> criteria{
      {"A1", "OU exponents equal -1", [w] { return a1(w); }},
      {"A2", "1d top exponent matches Gibbs average of b'", [w] { return a2(w); }},
      {"A3", "top exponent below Gibbs average of lambda+", [w] { return a3(w); }},
      {"A4", "lambda+ average negative for radial double well", [] { return a4(); }},
      {"A5", "two-point synchronization of the double well", [w] { return a5(w); }},
      {"A6", "cocycle identity bitwise", [] { return a6(); }},
      {"A7", "noise shift algebra bitwise", [] { return a7(); }},
      {"A8", "Gaussian Gibbs closed forms", [] { return a8(); }},
      {"A9", "circle pullback collapses to two antipodal points", [w] { return a9(w); }},
      {"A10", "Gibbs mass of B(0,2) decreases with sigma", [] { return a10(); }},
      {"A11", "swift-control witness", [] { return a11(); }},
      {"A12", "contraction witness", [] { return a12(); }},
      {"A13", "manifest replay is bitwise across worker counts", [&options] { return a13(options); }},
  };
  SuiteResult result;
  for (const auto& [id, title, fn] : criteria) {
    if (!options.only.empty() && std::find(options.only.begin(), options.only.end(), id) == options.only.end()) continue;
    const auto start = std::chrono::steady_clock::now();
    SuiteRow row{id, title, false, "", 0.0};
    try {
      const Outcome o = fn();
      row.passed = o.passed;
      row.detail = o.detail;
    } catch (const std::exception& e) {
      row.detail = std::string("error: ") + e.what();
    }
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    log << (row.passed ? "PASS " : "FAIL ") << id << " " << title << " -- " << row.detail << " [" << fmt(row.seconds, 3)
        << " s]" << std::endl;
    result.rows.push_back(std::move(row));
  }
  return result;
}

std::string format_table(const SuiteResult& result) {
  std::ostringstream s;
  s << std::left << std::setw(5) << "id" << std::setw(7) << "result" << "criterion\n";
  for (const auto& r : result.rows)
    s << std::left << std::setw(5) << r.id << std::setw(7) << (r.passed ? "PASS" : "FAIL") << r.title << "\n";
  s << (result.all_passed() ? "all criteria passed\n" : "some criteria failed\n");
  return s.str();
}

}  // namespace rdsync
