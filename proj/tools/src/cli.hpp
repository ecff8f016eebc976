#pragma once

#include <iosfwd>
#include <string>

namespace spheresel::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 2,
  kExitSolver = 3,
  kExitReplication = 4,
};

// Entry point shared by the executable and the CLI tests.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

// Cache file name for a schedule: eta_k<k>_a<alpha>_<16 hex digits>.csv
std::string schedule_cache_name(long long k, double alpha, unsigned long long key);

}  // namespace spheresel::cli
