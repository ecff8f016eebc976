#pragma once

#include <stdexcept>
#include <string>

namespace spheresel {

// Invalid argument to a numeric or statistical routine.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Inconsistent configuration detected before any sampling happens.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A root solver failed to bracket or converge. Carries the best iterate seen
// and the elimination level being solved (0 when not level-specific).
class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, double best_iterate, int level = 0)
      : std::runtime_error(what), best_iterate_(best_iterate), level_(level) {}

  double best_iterate() const noexcept { return best_iterate_; }
  int level() const noexcept { return level_; }

 private:
  double best_iterate_;
  int level_;
};

// A single replication of a macro experiment failed.
class ReplicationError : public std::runtime_error {
 public:
  ReplicationError(const std::string& what, long long replication)
      : std::runtime_error(what), replication_(replication) {}

  long long replication() const noexcept { return replication_; }

 private:
  long long replication_;
};

}  // namespace spheresel
