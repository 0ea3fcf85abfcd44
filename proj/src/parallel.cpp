#include "rdsync/parallel.hpp"

#include <cstdlib>
#include <string>

namespace rdsync {

int default_workers() {
  if (const char* env = std::getenv("RDSYNC_WORKERS")) {
    try {
      const int n = std::stoi(env);
      if (n > 0) return n;
    } catch (const std::exception&) {
    }
  }
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

}  // namespace rdsync
