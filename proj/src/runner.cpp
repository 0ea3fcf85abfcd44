#include "rdsync/runner.hpp"

#include "rdsync/diagnostics.hpp"
#include "rdsync/error.hpp"
#include "rdsync/lyapunov.hpp"
#include "rdsync/measure.hpp"
#include "rdsync/noise.hpp"
#include "rdsync/parallel.hpp"
#include "rdsync/suite.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>

namespace fs = std::filesystem;

namespace rdsync {

const std::vector<std::string>& commands() {
  static const std::vector<std::string> names{"simulate", "lyapunov", "gibbs", "sync",    "diam",
                                              "pullback", "cluster",  "check", "control", "paper-suite"};
  return names;
}

Json RunManifest::to_json() const {
  Json out;
  out["toolkit"] = "rdsync";
  out["version"] = kVersion;
  out["command"] = command;
  out["config"] = config;
  out["config_hash"] = config_hash;
  out["seeds"] = seeds;
  out["workers"] = workers;
  out["wall_clock_seconds"] = wall_clock_seconds;
  out["outputs"] = Json::array();
  for (const auto& o : outputs) out["outputs"].push_back({{"file", o.name}, {"sha256", o.sha256}, {"bytes", o.bytes}});
  out["errors"] = errors;
  out["exit_code"] = exit_code;
  return out;
}

std::vector<std::uint64_t> derived_seeds(const Config& c) {
  std::vector<std::uint64_t> seeds;
  if (c.has("noise.seeds")) {
    const Json& list = c.at("noise.seeds");
    if (!list.is_array()) throw ConfigError("noise.seeds", "expected a list of integer seeds");
    for (std::size_t i = 0; i < list.size(); ++i) {
      if (!list[i].is_number_unsigned() && !(list[i].is_number_integer() && list[i].get<std::int64_t>() >= 0))
        throw ConfigError("noise.seeds[" + std::to_string(i) + "]", "expected a non-negative integer");
      seeds.push_back(list[i].get<std::uint64_t>());
    }
    return seeds;
  }
  const std::int64_t n = c.integer("run.n_seeds", 1);
  if (n < 0) throw ConfigError("run.n_seeds", "must be non-negative");
  const auto base = static_cast<std::uint64_t>(c.integer("noise.seed", 0));
  for (std::int64_t i = 0; i < n; ++i) seeds.push_back(member_seed(base, static_cast<std::uint64_t>(i)));
  return seeds;
}

namespace {

const std::vector<std::string> kKnownKeys{
    "field.",        "noise.seed",  "noise.seeds",   "noise.delta", "noise.window", "noise.sigma",
    "integrator.",   "run.command", "run.t0",        "run.t1",      "run.x0",       "run.n_seeds",
    "run.workers",   "run.record_every", "output.dir", "lyapunov.", "gibbs.",       "sync.",
    "diam.",         "pullback.",   "cluster.",      "check.",      "control.",     "suite."};

std::string num(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

Json to_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Json to_json(const Points& pts) {
  Json out = Json::array();
  for (const auto& p : pts) out.push_back(to_json(p));
  return out;
}

// Collects output files and their digests; single writer per file.
class Outputs {
 public:
  explicit Outputs(fs::path dir) : dir_(std::move(dir)) {}

  void write(const std::string& name, const std::string& content) {
    std::ofstream out(dir_ / name, std::ios::binary);
    if (!out) throw Error("cannot write output file " + (dir_ / name).string());
    out << content;
    out.close();
    files_.push_back({name, sha256_hex(content), content.size()});
  }
  void write_json(const std::string& name, const Json& doc) { write(name, doc.dump(2) + "\n"); }

  std::vector<OutputFile> files() const { return files_; }

 private:
  fs::path dir_;
  std::vector<OutputFile> files_;
};

struct Context {
  const Config& config;
  std::string hash;
  int workers;
  Outputs& out;
  std::vector<std::uint64_t>& seeds;
  std::vector<std::string>& errors;
};

double sigma_of(const Config& c) {
  const double s = c.number("noise.sigma", 1.0);
  if (!(s >= 0.0)) throw ConfigError("noise.sigma", "must be non-negative");
  return s;
}

Points initial_points(const Config& c, const DriftField& f) {
  if (!c.has("run.x0")) return {Vec::Zero(f.dim())};
  return c.points("run.x0", f.dim());
}

std::vector<double> checkpoints(const Config& c, const std::string& block, double T, double dt) {
  if (c.has(block + ".checkpoints")) return c.numbers(block + ".checkpoints");
  std::vector<double> out;
  const auto total = static_cast<std::int64_t>(std::llround(T / dt));
  for (int i = 1; i <= 10; ++i) out.push_back(static_cast<double>(total * i / 10) * dt);
  return out;
}

std::string sync_csv(const SyncReport& r) {
  std::string s = "t,q05,q25,q50,q75,q95,exceed_prob\n";
  for (std::size_t i = 0; i < r.checkpoints.size(); ++i) {
    const auto& q = r.distance_quantiles[i];
    s += num(r.checkpoints[i]) + "," + num(q.q05) + "," + num(q.q25) + "," + num(q.q50) + "," + num(q.q75) + "," +
         num(q.q95) + "," + num(r.exceed_prob[i]) + "\n";
  }
  return s;
}

Json sync_json(const SyncReport& r, const std::string& hash) {
  Json j;
  j["statistic"] = r.statistic;
  j["checkpoints"] = r.checkpoints;
  j["epsilon"] = r.epsilon;
  j["ensemble_size"] = r.ensemble_size;
  j["exploded"] = r.exploded;
  j["config_hash"] = hash;
  j["note"] = "values are reported at finite checkpoints only; no limit is claimed";
  for (std::size_t i = 0; i < r.checkpoints.size(); ++i) {
    const auto& q = r.distance_quantiles[i];
    j["rows"].push_back({{"t", r.checkpoints[i]},
                         {"q05", q.q05},
                         {"q25", q.q25},
                         {"q50", q.q50},
                         {"q75", q.q75},
                         {"q95", q.q95},
                         {"min", q.min},
                         {"max", q.max},
                         {"exceed_prob", r.exceed_prob[i]},
                         {"exceed_ci", {r.exceed_ci[i].lo, r.exceed_ci[i].hi}}});
  }
  if (r.final_fraction_below) j["final_fraction_below_epsilon"] = *r.final_fraction_below;
  return j;
}

// Runs fn for every seed in parallel; failures are recorded per seed and the sweep continues.
template <class R>
std::vector<std::optional<R>> sweep(Context& ctx, const std::function<R(std::uint64_t)>& fn) {
  struct Slot {
    std::optional<R> value;
    std::string error;
  };
  auto slots = parallel_map(ctx.seeds.size(), ctx.workers, [&](std::size_t i) {
    Slot s;
    try {
      s.value = fn(ctx.seeds[i]);
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      s.error = e.what();
    }
    return s;
  });
  std::vector<std::optional<R>> out;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (!slots[i].error.empty()) ctx.errors.push_back("seed " + std::to_string(ctx.seeds[i]) + ": " + slots[i].error);
    out.push_back(std::move(slots[i].value));
  }
  return out;
}

void cmd_simulate(Context& ctx) {
  const Config& c = ctx.config;
  const DriftField f = field_from_config(c);
  const IntegratorSpec spec = integrator_from_config(c);
  const double sigma = sigma_of(c);
  const double t0 = c.number("run.t0", 0.0), t1 = c.number("run.t1", 10.0);
  const int record_every = static_cast<int>(c.integer("run.record_every", 1));
  const Points x0 = initial_points(c, f);
  std::vector<double> window{std::min(t0, 0.0), std::max(t1, 0.0)};
  if (c.has("noise.window")) {
    window = c.numbers("noise.window");
    if (window.size() != 2) throw ConfigError("noise.window", "expected [t_min, t_max]");
  }
  const auto results = sweep<std::vector<Trajectory>>(ctx, [&](std::uint64_t seed) {
    const WienerPath path = sample_path(seed, f.noise_dim(), spec.dt, window[0], window[1]);
    std::vector<Trajectory> trs;
    for (const auto& x : x0) {
      trs.push_back(evolve(f, spec, sigma, path, x, t0, t1, record_every));
      trs.back().seed = seed;
    }
    return trs;
  });
  Json summary;
  summary["config_hash"] = ctx.hash;
  summary["runs"] = Json::array();
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (!results[i]) continue;
    for (std::size_t j = 0; j < results[i]->size(); ++j) {
      const Trajectory& tr = (*results[i])[j];
      std::string csv = "t";
      for (int k = 1; k <= f.dim(); ++k) csv += ",x" + std::to_string(k);
      csv += "\n";
      for (std::size_t n = 0; n < tr.times.size(); ++n) {
        csv += num(tr.times[n]);
        for (Eigen::Index k = 0; k < tr.states[n].size(); ++k) csv += "," + num(tr.states[n][k]);
        csv += "\n";
      }
      const std::string name = "trajectory_" + std::to_string(i) + (x0.size() > 1 ? "_" + std::to_string(j) : "") + ".csv";
      ctx.out.write(name, csv);
      Json r{{"seed", tr.seed}, {"file", name}, {"x0", to_json(x0[j])}, {"end", to_json(tr.end())}, {"exploded", tr.exploded}};
      if (tr.explosion_time) r["explosion_time"] = *tr.explosion_time;
      summary["runs"].push_back(r);
    }
  }
  if (!ctx.seeds.empty()) ctx.out.write_json("simulate.json", summary);
}

// Mean of log+ |Dphi_1| over consecutive unit-time windows along one path: an empirical
// look at the integrability hypothesis, which itself cannot be verified.
double log_moment(const DriftField& f, const IntegratorSpec& spec, double sigma, std::uint64_t seed, const Vec& x0,
                  int windows) {
  const auto steps = static_cast<std::int64_t>(std::llround(1.0 / spec.dt));
  const WienerPath path = sample_path(seed, f.noise_dim(), spec.dt, 0.0, static_cast<double>(steps * windows) * spec.dt);
  Vec x = x0;
  double sum = 0.0;
  for (int w = 0; w < windows; ++w) {
    TangentIntegrator tan(f, spec, sigma, path, x, f.dim(), steps * w);
    tan.advance(steps, std::numeric_limits<int>::max(), false);
    const double norm = Eigen::JacobiSVD<Mat>(tan.frame().frame).singularValues()(0);
    sum += std::max(0.0, std::log(norm));
    x = tan.state();
  }
  return sum / windows;
}

void cmd_lyapunov(Context& ctx) {
  const Config& c = ctx.config;
  const DriftField f = field_from_config(c);
  const IntegratorSpec spec = integrator_from_config(c);
  const double sigma = sigma_of(c);
  const Vec x0 = initial_points(c, f).front();
  LyapunovOptions o;
  o.k = static_cast<int>(c.integer("lyapunov.k", 1));
  o.T = c.number("lyapunov.T", o.T);
  o.burn_in = c.number("lyapunov.burn_in", -1.0);
  o.qr_every = static_cast<int>(c.integer("lyapunov.qr_every", o.qr_every));
  o.n_blocks = static_cast<int>(c.integer("lyapunov.n_blocks", o.n_blocks));
  o.running_points = static_cast<int>(c.integer("lyapunov.running_points", o.running_points));
  o.dt = spec.dt;
  o.scheme = spec.scheme;
  const bool twopoint = c.boolean("lyapunov.twopoint", false);
  const int windows = static_cast<int>(c.integer("lyapunov.log_moment_windows", 20));
  if (windows < 1) throw ConfigError("lyapunov.log_moment_windows", "must be at least 1");
  struct Replica {
    LyapunovSpectrum spectrum;
    std::optional<TwoPointEstimate> twopoint;
    double log_moment = 0.0;
  };
  const auto results = sweep<Replica>(ctx, [&](std::uint64_t seed) {
    Replica r{spectrum_benettin(f, sigma, seed, x0, o), std::nullopt,
              log_moment(f, IntegratorSpec{o.scheme, o.dt}, sigma, seed, x0, windows)};
    if (twopoint) {
      TwoPointOptions t;
      t.T = o.T;
      t.dt = o.dt;
      t.scheme = o.scheme;
      t.delta0 = c.number("lyapunov.delta0", t.delta0);
      r.twopoint = top_exponent_twopoint(f, sigma, seed, x0, t);
    }
    return r;
  });
  if (ctx.seeds.empty()) return;
  Json j;
  j["config_hash"] = ctx.hash;
  j["hypotheses"] = "integrability of log+ |Dphi_1| assumed, not verified";
  std::vector<double> sum(static_cast<std::size_t>(o.k), 0.0), var(static_cast<std::size_t>(o.k), 0.0);
  std::size_t ok = 0;
  std::string csv = "seed,t";
  for (int i = 1; i <= o.k; ++i) csv += ",lambda" + std::to_string(i);
  csv += "\n";
  for (std::size_t s = 0; s < results.size(); ++s) {
    if (!results[s]) continue;
    const auto& sp = results[s]->spectrum;
    Json r{{"seed", sp.seed},
           {"exponents", sp.exponents},
           {"stderr", sp.block_std_errors},
           {"T_effective", sp.T_effective},
           {"max_orthonormality_error", sp.max_orthonormality_error},
           {"log_plus_jacobian_norm_mean", results[s]->log_moment}};
    if (results[s]->twopoint) r["twopoint"] = {{"exponent", results[s]->twopoint->exponent}, {"stderr", results[s]->twopoint->std_error}};
    j["replicas"].push_back(r);
    for (int i = 0; i < o.k; ++i) {
      sum[static_cast<std::size_t>(i)] += sp.exponents[static_cast<std::size_t>(i)];
      var[static_cast<std::size_t>(i)] += sp.block_std_errors[static_cast<std::size_t>(i)] * sp.block_std_errors[static_cast<std::size_t>(i)];
    }
    ++ok;
    for (const auto& row : sp.running) {
      csv += std::to_string(sp.seed) + "," + num(row.t);
      for (double v : row.exponents) csv += "," + num(v);
      csv += "\n";
    }
  }
  if (ok > 0) {
    for (int i = 0; i < o.k; ++i) {
      j["exponents"].push_back(sum[static_cast<std::size_t>(i)] / static_cast<double>(ok));
      j["stderr"].push_back(std::sqrt(var[static_cast<std::size_t>(i)]) / static_cast<double>(ok));
    }
  }
  if (f.is_gradient() && f.dim() <= 3 && sigma > 0.0 && c.boolean("lyapunov.bound", true)) {
    const GibbsMeasure g = normalize(f, sigma);
    const auto b = lambda_plus_bound(f, g);
    j["lambda_plus_bound"] = {{"value", b.value}, {"error", b.error}};
    if (f.dim() == 1) {
      const auto q = gradient_1d_exponent(f, g);
      j["gradient_1d_exponent"] = {{"value", q.value}, {"error", q.error}};
    }
  }
  ctx.out.write_json("lyapunov.json", j);
  ctx.out.write("lyapunov_running.csv", csv);
}

void cmd_gibbs(Context& ctx) {
  const Config& c = ctx.config;
  const DriftField f = field_from_config(c);
  const double sigma = sigma_of(c);
  GibbsOptions o;
  if (c.has("gibbs.box")) {
    const auto b = c.numbers("gibbs.box");
    if (b.size() != 2) throw ConfigError("gibbs.box", "expected [lo, hi]");
    o.box = Box{b[0], b[1]};
  }
  o.points_per_axis = static_cast<int>(c.integer("gibbs.points_per_axis", 0));
  o.tail_tolerance = c.number("gibbs.tail_tolerance", o.tail_tolerance);
  const GibbsMeasure g = normalize(f, sigma, o);
  const int d = f.dim();
  Json j;
  j["config_hash"] = ctx.hash;
  j["Z"] = g.Z();
  j["log_Z"] = g.log_Z();
  j["box"] = {g.box().lo, g.box().hi};
  j["grid_points_per_axis"] = g.grid_points_per_axis();
  j["tail_mass_estimate"] = g.tail_mass_estimate();
  j["normalization_refinement"] = g.normalization_refinement();
  for (int i = 0; i < d; ++i) {
    const auto m = g.expect([i](const Vec& x) { return x[i]; });
    j["moments"]["mean"].push_back(m.value);
    Json row = Json::array();
    for (int k = 0; k < d; ++k) row.push_back(g.expect([i, k](const Vec& x) { return x[i] * x[k]; }).value);
    j["moments"]["second"].push_back(row);
  }
  for (double R : c.numbers("gibbs.radii", {0.5, 1.0, 2.0, 4.0})) {
    const auto m = g.ball_mass(R);
    j["ball_mass"].push_back({{"R", R}, {"mass", m.value}, {"error", m.error}});
  }
  const auto b = lambda_plus_bound(f, g);
  j["lambda_plus_bound"] = {{"value", b.value}, {"error", b.error}};
  if (d == 1) {
    const auto q = gradient_1d_exponent(f, g);
    j["gradient_1d_exponent"] = {{"value", q.value}, {"error", q.error}};
  }
  ctx.out.write_json("gibbs.json", j);

  const int n = static_cast<int>(c.integer("gibbs.plot_points", d == 3 ? 41 : 101));
  if (n < 2) throw ConfigError("gibbs.plot_points", "need at least 2 points per axis");
  std::string csv;
  for (int k = 1; k <= d; ++k) csv += "x" + std::to_string(k) + ",";
  csv += "density\n";
  std::int64_t total = 1;
  for (int k = 0; k < d; ++k) total *= n;
  Vec x(d);
  for (std::int64_t flat = 0; flat < total; ++flat) {
    std::int64_t r = flat;
    for (int k = d - 1; k >= 0; --k) {
      x[k] = g.box().lo + (g.box().hi - g.box().lo) * static_cast<double>(r % n) / (n - 1);
      r /= n;
    }
    for (int k = 0; k < d; ++k) csv += num(x[k]) + ",";
    csv += num(g.density(x)) + "\n";
  }
  ctx.out.write("gibbs_density.csv", csv);
}

EnsembleOptions ensemble_options(Context& ctx) {
  EnsembleOptions o;
  o.integrator = integrator_from_config(ctx.config);
  o.base_seed = static_cast<std::uint64_t>(ctx.config.integer("noise.seed", 0));
  o.workers = ctx.workers;
  return o;
}

void cmd_sync(Context& ctx) {
  const Config& c = ctx.config;
  const DriftField f = field_from_config(c);
  const EnsembleOptions o = ensemble_options(ctx);
  const double T = c.number("sync.T", 100.0);
  const auto n = static_cast<std::size_t>(c.integer("run.n_seeds", 100));
  if (n == 0) return;
  SyncReport r = two_point_sync(f, sigma_of(c), c.point("sync.x", f.dim()), c.point("sync.y", f.dim()), T, n,
                                checkpoints(c, "sync", T, o.integrator.dt), c.number("sync.epsilon", 0.05), o);
  r.config_hash = ctx.hash;
  ctx.out.write_json("sync.json", sync_json(r, ctx.hash));
  ctx.out.write("sync.csv", sync_csv(r));
}

void cmd_diam(Context& ctx) {
  const Config& c = ctx.config;
  const DriftField f = field_from_config(c);
  const EnsembleOptions o = ensemble_options(ctx);
  const double T = c.number("diam.T", 100.0);
  const auto n = static_cast<std::size_t>(c.integer("run.n_seeds", 100));
  if (n == 0) return;
  const Vec center = c.has("diam.center") ? c.point("diam.center", f.dim()) : Vec::Zero(f.dim());
  SyncReport r = ball_diameter(f, sigma_of(c), center, c.number("diam.radius", 1.0),
                               static_cast<int>(c.integer("diam.mesh_n", 32)), T, n,
                               checkpoints(c, "diam", T, o.integrator.dt), c.number("diam.epsilon", 0.05), o);
  r.config_hash = ctx.hash;
  ctx.out.write_json("diam.json", sync_json(r, ctx.hash));
  ctx.out.write("diam.csv", sync_csv(r));
}

Points pullback_init(const Config& c, const DriftField& f) {
  if (c.has("pullback.init")) return c.points("pullback.init", f.dim());
  const auto n = static_cast<int>(c.integer("pullback.n_init", 64));
  if (n < 1) throw ConfigError("pullback.n_init", "must be positive");
  if (f.periodic()) {
    Points pts;
    for (int i = 0; i < n; ++i) pts.push_back(Vec::Constant(f.dim(), kTwoPi * i / n));
    return pts;
  }
  return ball_mesh(Vec::Zero(f.dim()), c.number("pullback.init_radius", 2.0), n);
}

double max_pairwise_distance(const DriftField& f, const Points& pts) {
  double m = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j) m = std::max(m, chart_distance(f, pts[i], pts[j]));
  return m;
}

void cmd_pullback(Context& ctx, bool cluster) {
  const Config& c = ctx.config;
  const DriftField f = field_from_config(c);
  const IntegratorSpec spec = integrator_from_config(c);
  const double sigma = sigma_of(c);
  const Points init = pullback_init(c, f);
  const std::string block = cluster ? "cluster" : "pullback";
  std::vector<double> times = c.numbers(block + ".times", cluster ? std::vector<double>{30.0} : std::vector<double>{0, 5, 10, 20});
  const auto results = sweep<PullbackEnsemble>(ctx, [&](std::uint64_t seed) {
    return pullback_ensemble(f, sigma, seed, init, times, spec);
  });
  if (ctx.seeds.empty()) return;
  Json j;
  j["config_hash"] = ctx.hash;
  j["times"] = times;
  j["n_init"] = init.size();
  if (!cluster) {
    for (std::size_t s = 0; s < results.size(); ++s) {
      if (!results[s]) continue;
      const auto& pe = *results[s];
      std::string csv = "t,member";
      for (int k = 1; k <= f.dim(); ++k) csv += ",x" + std::to_string(k);
      csv += "\n";
      Json r{{"seed", pe.seed}};
      for (std::size_t t = 0; t < pe.times.size(); ++t) {
        std::size_t exploded = 0;
        for (std::size_t m = 0; m < pe.endpoints[t].size(); ++m) {
          exploded += pe.exploded[t][m] ? 1 : 0;
          csv += num(pe.times[t]) + "," + std::to_string(m);
          for (Eigen::Index k = 0; k < f.dim(); ++k) csv += "," + num(pe.endpoints[t][m][k]);
          csv += "\n";
        }
        r["diameter"].push_back(max_pairwise_distance(f, pe.endpoints[t]));
        r["exploded"].push_back(exploded);
      }
      r["file"] = "pullback_" + std::to_string(s) + ".csv";
      ctx.out.write(r["file"].get<std::string>(), csv);
      j["seeds"].push_back(r);
    }
    ctx.out.write_json("pullback.json", j);
    return;
  }
  const double eps = c.number("cluster.epsilon", default_linkage_epsilon(std::max(sigma, 1e-12), spec.dt));
  const Metric metric = f.periodic() ? Metric::arc : Metric::euclidean;
  j["linkage_epsilon"] = eps;
  j["metric"] = metric == Metric::arc ? "arc" : "euclidean";
  std::string csv = "seed,cluster_count,max_intra_cluster_diameter\n";
  std::map<std::size_t, std::size_t> histogram;
  for (std::size_t s = 0; s < results.size(); ++s) {
    if (!results[s]) continue;
    const auto& pe = *results[s];
    const ClusterReport cr = cluster_count(pe.endpoints.back(), eps, metric);
    ++histogram[cr.cluster_count];
    csv += std::to_string(pe.seed) + "," + std::to_string(cr.cluster_count) + "," + num(cr.max_intra_cluster_diameter) + "\n";
    j["seeds"].push_back({{"seed", pe.seed},
                          {"cluster_count", cr.cluster_count},
                          {"sizes", cr.sizes},
                          {"centers", to_json(cr.centers)},
                          {"max_intra_cluster_diameter", cr.max_intra_cluster_diameter}});
  }
  for (const auto& [count, n] : histogram) j["count_histogram"][std::to_string(count)] = n;
  ctx.out.write_json("cluster.json", j);
  ctx.out.write("cluster.csv", csv);
}

Json report_json(const DriftField& f, const ConditionReport& r) {
  Json j{{"kind", std::string(to_string(r.kind))},
         {"verdict", std::string(to_string(r.verdict))},
         {"constants", r.constants},
         {"witness", to_json(r.witness)},
         {"samples_used", r.samples_used}};
  if (!r.note.empty()) j["note"] = r.note;
  if (r.verdict == Verdict::violated_with_witness) j["witness_replays"] = replay_violation(f, r);
  return j;
}

void cmd_check(Context& ctx) {
  const Config& c = ctx.config;
  const DriftField f = field_from_config(c);
  const auto seed = static_cast<std::uint64_t>(c.integer("noise.seed", 0));
  const auto n_pairs = static_cast<std::size_t>(c.integer("check.n_pairs", 20000));
  const int d = f.dim();
  std::vector<std::string> kinds{"one_sided_lipschitz", "eventual_monotone", "monotone_large_sets", "gradient_direction"};
  if (c.has("check.kinds")) {
    kinds.clear();
    const Json& k = c.at("check.kinds");
    if (!k.is_array()) throw ConfigError("check.kinds", "expected a list");
    for (const auto& v : k) kinds.push_back(v.get<std::string>());
  }
  auto axis_points = [&](std::initializer_list<double> ts) {
    Points p;
    for (double t : ts) {
      Vec z = Vec::Zero(d);
      z[0] = t;
      p.push_back(z);
    }
    return p;
  };
  Json j;
  j["config_hash"] = ctx.hash;
  for (const auto& kind : kinds) {
    if (kind == "one_sided_lipschitz") {
      const auto b = c.numbers("check.box", {-3.0, 3.0});
      if (b.size() != 2) throw ConfigError("check.box", "expected [lo, hi]");
      j["reports"].push_back(report_json(f, check_one_sided_lipschitz(f, Box{b[0], b[1]}, n_pairs, seed)));
    } else if (kind == "eventual_monotone") {
      j["reports"].push_back(report_json(f, check_eventual_monotone(f, c.number("check.R", 2.0), n_pairs, seed)));
    } else if (kind == "monotone_large_sets") {
      const Points z = c.has("check.z_candidates") ? c.points("check.z_candidates", d) : axis_points({0, 1, 2, 4, 8});
      j["reports"].push_back(report_json(f, check_monotone_on_large_sets(f, c.number("check.r", 1.0), z, n_pairs, seed)));
    } else if (kind == "gradient_direction") {
      Vec v = Vec::Zero(d);
      v[0] = 2.0;
      if (c.has("check.v")) v = c.point("check.v", d);
      const Points z = c.has("check.z_grid") ? c.points("check.z_grid", d) : axis_points({-4, -3, -2, -1, 0, 1, 2, 3, 4});
      j["reports"].push_back(report_json(f, gradient_direction_search(f, v, z)));
    } else {
      throw ConfigError("check.kinds", "unknown condition '" + kind + "'");
    }
  }
  // Hessian positivity at user-supplied minima (locating global minima is not attempted).
  if (c.has("check.minima")) {
    if (!f.is_gradient()) throw ConfigError("check.minima", "field has no potential");
    for (const auto& z : c.points("check.minima", d)) {
      const double lmin = min_symmetric_eigenvalue(f.hessian(z));
      j["minima"].push_back({{"point", to_json(z)}, {"min_hessian_eigenvalue", lmin}, {"positive", lmin > 0.0}});
    }
  }
  ctx.out.write_json("check.json", j);
}

void cmd_control(Context& ctx) {
  const Config& c = ctx.config;
  const DriftField f = field_from_config(c);
  const double sigma = sigma_of(c);
  const int d = f.dim();
  Json j;
  j["config_hash"] = ctx.hash;
  if (c.has("control.z")) {
    SwiftControlOptions o;
    o.n_steps = static_cast<int>(c.integer("control.n_steps", o.n_steps));
    o.mesh_n = static_cast<int>(c.integer("control.mesh_n", o.mesh_n));
    o.bound_samples = static_cast<int>(c.integer("control.bound_samples", o.bound_samples));
    if (c.has("control.scheme")) o.scheme = parse_scheme(c.string("control.scheme"));
    const Vec x = c.has("control.x") ? c.point("control.x", d) : Vec::Zero(d);
    const SwiftControlResult r = swift_control(f, sigma, x, c.number("control.r", 0.1), c.point("control.z", d),
                                               c.number("control.t0", 0.0), c.number("control.delta", 0.1), o);
    j["swift"] = {{"B", r.B},   {"T0", r.T0}, {"t0", r.t0}, {"dt", r.dt}, {"residual", r.residual},
                  {"mesh_max_error", r.mesh_max_error}, {"all_within_delta", r.all_within_delta}, {"mesh", to_json(r.mesh)}};
    std::string csv = "t";
    for (int k = 1; k <= f.noise_dim(); ++k) csv += ",f" + std::to_string(k);
    csv += "\n";
    for (std::size_t i = 0; i < r.times.size(); ++i) {
      csv += num(r.times[i]);
      for (Eigen::Index k = 0; k < r.control[i].size(); ++k) csv += "," + num(r.control[i][k]);
      csv += "\n";
    }
    ctx.out.write("control.csv", csv);
  }
  if (c.has("control.R")) {
    ContractionOptions o;
    o.mesh_n = static_cast<int>(c.integer("control.contraction_mesh_n", o.mesh_n));
    o.n_pairs = static_cast<std::size_t>(c.integer("control.n_pairs", static_cast<std::int64_t>(o.n_pairs)));
    o.seed = static_cast<std::uint64_t>(c.integer("noise.seed", 1));
    o.integrator.dt = c.number("integrator.dt", o.integrator.dt);
    const Vec z = c.has("control.center") ? c.point("control.center", d) : Vec::Zero(d);
    const ContractionWitness w = contraction_witness(f, sigma, c.number("control.R"), z, c.number("control.c", 0.0), o);
    j["contraction"] = {{"c", w.c}, {"T0", w.T0}, {"ratio", w.ratio}, {"satisfied", w.satisfied}};
  }
  if (!j.contains("swift") && !j.contains("contraction"))
    throw ConfigError("control.z", "set control.z (swift transitivity) and/or control.R (contraction)");
  ctx.out.write_json("control.json", j);
}

int cmd_suite(Context& ctx, const fs::path& dir, std::ostream* sink) {
  SuiteOptions o;
  o.workers = ctx.workers;
  o.scratch_dir = (dir / "scratch").string();
  if (ctx.config.has("suite.only")) {
    for (const auto& id : ctx.config.at("suite.only")) o.only.push_back(id.get<std::string>());
  }
  std::ostringstream buffer;
  const SuiteResult r = run_suite(o, sink ? *sink : buffer);
  std::error_code ec;
  fs::remove_all(o.scratch_dir, ec);
  ctx.out.write("suite.txt", format_table(r));
  Json j;
  for (const auto& row : r.rows) j["criteria"].push_back({{"id", row.id}, {"title", row.title}, {"passed", row.passed}, {"detail", row.detail}});
  j["all_passed"] = r.all_passed();
  ctx.out.write_json("suite.json", j);
  return r.all_passed() ? kExitOk : kExitAcceptance;
}

}  // namespace

RunManifest run(Config config, const RunOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  if (std::find(commands().begin(), commands().end(), options.command) == commands().end())
    throw ConfigError("run.command", "unknown command '" + options.command + "'");
  if (config.has("run.command") && config.string("run.command") != options.command)
    throw ConfigError("run.command", "config was written for '" + config.string("run.command") + "'");
  config.set("run.command", options.command);
  if (options.seed) config.set("noise.seed", *options.seed);
  config.require_known(kKnownKeys);

  RunManifest m;
  m.command = options.command;
  m.workers = options.workers ? *options.workers : static_cast<int>(config.integer("run.workers", default_workers()));
  if (m.workers < 1) throw ConfigError("run.workers", "must be at least 1");
  config.erase("run.workers");
  m.config = config.snapshot();
  m.config_hash = config.hash();
  const bool per_seed = options.command == "simulate" || options.command == "lyapunov" ||
                        options.command == "pullback" || options.command == "cluster";
  if (per_seed) {
    m.seeds = derived_seeds(config);
  } else if (options.command == "sync" || options.command == "diam") {
    const auto n = config.integer("run.n_seeds", 100);
    if (n < 0) throw ConfigError("run.n_seeds", "must be non-negative");
    for (std::int64_t i = 0; i < n; ++i)
      m.seeds.push_back(member_seed(static_cast<std::uint64_t>(config.integer("noise.seed", 0)), static_cast<std::uint64_t>(i)));
  } else if (options.command != "paper-suite") {
    m.seeds.push_back(static_cast<std::uint64_t>(config.integer("noise.seed", 0)));
  }

  const fs::path dir(options.out_dir);
  fs::create_directories(dir);
  Outputs out(dir);
  Context ctx{config, m.config_hash, m.workers, out, m.seeds, m.errors};
  try {
    if (options.command == "simulate") cmd_simulate(ctx);
    else if (options.command == "lyapunov") cmd_lyapunov(ctx);
    else if (options.command == "gibbs") cmd_gibbs(ctx);
    else if (options.command == "sync") cmd_sync(ctx);
    else if (options.command == "diam") cmd_diam(ctx);
    else if (options.command == "pullback") cmd_pullback(ctx, false);
    else if (options.command == "cluster") cmd_pullback(ctx, true);
    else if (options.command == "check") cmd_check(ctx);
    else if (options.command == "control") cmd_control(ctx);
    else m.exit_code = cmd_suite(ctx, dir, options.log);
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    m.errors.push_back(e.what());
  }
  if (!m.errors.empty() && m.exit_code == kExitOk) m.exit_code = kExitNumeric;
  m.outputs = out.files();
  m.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::ofstream mf(dir / "manifest.json");
  mf << m.to_json().dump(2) << "\n";
  return m;
}

}  // namespace rdsync
