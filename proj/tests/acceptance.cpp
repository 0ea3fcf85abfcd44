#include "rdsync/parallel.hpp"
#include "rdsync/suite.hpp"

#include <filesystem>
#include <iostream>

int main(int argc, char** argv) {
  rdsync::SuiteOptions options;
  options.workers = rdsync::default_workers();
  options.scratch_dir = (std::filesystem::temp_directory_path() / "rdsync_acceptance").string();
  for (int i = 1; i < argc; ++i) options.only.emplace_back(argv[i]);
  const auto result = rdsync::run_suite(options, std::cout);
  std::cout << "\n" << rdsync::format_table(result);
  return result.all_passed() ? 0 : 1;
}
