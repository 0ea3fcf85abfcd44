#pragma once

#include "rdsync/config.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace rdsync {

inline constexpr const char* kVersion = "0.1.0";

// Process exit codes of the CLI.
enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitNumeric = 3, kExitAcceptance = 4 };

// Subcommands: simulate, lyapunov, gibbs, sync, diam, pullback, cluster, check, control, paper-suite.
const std::vector<std::string>& commands();

struct RunOptions {
  std::string command;
  std::string out_dir = "out";
  std::optional<std::uint64_t> seed;  // overrides noise.seed
  std::optional<int> workers;         // overrides run.workers; default from the environment
  std::ostream* log = nullptr;        // progress lines of long commands
};

struct OutputFile {
  std::string name;
  std::string sha256;
  std::uintmax_t bytes = 0;
};

struct RunManifest {
  std::string command;
  Json config;  // snapshot, re-loadable with Config::from_json
  std::string config_hash;
  std::vector<std::uint64_t> seeds;
  int workers = 1;
  double wall_clock_seconds = 0.0;
  std::vector<OutputFile> outputs;
  std::vector<std::string> errors;  // per-seed failures, run continued
  int exit_code = kExitOk;

  Json to_json() const;
};

// Executes `options.command` for the config and writes outputs plus manifest.json into
// options.out_dir. Outputs are byte-identical for any worker count. Throws ConfigError for
// invalid configs; per-seed numerical failures are recorded and yield exit code 3.
RunManifest run(Config config, const RunOptions& options);

// Seeds of the sweep: the explicit list noise.seeds if present, else
// member_seed(noise.seed, i) for i < run.n_seeds (default 1).
std::vector<std::uint64_t> derived_seeds(const Config& config);

}  // namespace rdsync
