#include "rdsync/error.hpp"
#include "rdsync/runner.hpp"

#include "CLI11.hpp"

#include <iostream>

int main(int argc, char** argv) {
  using namespace rdsync;
  CLI::App app{"Random dynamical systems: simulation, Lyapunov exponents and synchronization diagnostics"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  std::string config_path, out_dir = "out";
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  for (const auto& name : commands()) {
    auto* sub = app.add_subcommand(name, "run the " + name + " command");
    auto* cfg = sub->add_option("--config,-c", config_path, "config file (text or JSON, or a manifest.json to replay)");
    if (name != "paper-suite") cfg->required();
    sub->add_option("--seed", seed, "override noise.seed");
    sub->add_option("--workers,-j", workers, "worker threads (default: $RDSYNC_WORKERS or all cores)")->check(CLI::PositiveNumber);
    sub->add_option("--out,-o", out_dir, "output directory")->capture_default_str();
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  RunOptions options;
  options.command = app.get_subcommands().front()->get_name();
  options.out_dir = out_dir;
  options.seed = seed;
  options.workers = workers;
  options.log = &std::cout;
  try {
    const Config config = config_path.empty() ? Config{} : Config::load(config_path);
    const RunManifest m = run(config, options);
    for (const auto& e : m.errors) std::cerr << "error: " << e << "\n";
    std::cout << options.command << ": " << m.outputs.size() << " output file(s) in " << out_dir << ", config "
              << m.config_hash.substr(0, 12) << ", " << m.wall_clock_seconds << " s\n";
    return m.exit_code;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  }
}
