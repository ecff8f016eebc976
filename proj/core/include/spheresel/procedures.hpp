#pragma once

// Fully sequential elimination procedures. DK1 (known common variance), DK2
// (pooled variance estimate) and DK3 (unequal variances with variance-paced
// sampling) screen with a sphere-shaped continuation region; KN is the
// pairwise triangular baseline with known or estimated variances.

#include <functional>
#include <optional>
#include <string_view>
#include <vector>

#include "spheresel/eta.hpp"
#include "spheresel/samplers.hpp"
#include "spheresel/screening.hpp"

namespace spheresel::procedures {

enum class Procedure { DK1, DK2, DK3, KN, KNUnknown };

std::string_view to_string(Procedure p);
Procedure procedure_from_string(std::string_view text);  // DK1 DK2 DK3 KN KN-UNK
bool uses_schedule(Procedure p);
bool needs_known_variance(Procedure p);

inline constexpr long long kDefaultObservationCap = 1'000'000'000;

struct ProcedureConfig {
  int k = 2;
  double delta = 1.0;
  double alpha = 0.1;
  long long n0 = 1;
  long long b_z = 1;
  eta::EtaSchedule schedule;  // unused by KN
  std::optional<double> known_sigma2;
  long long max_total_observations = kDefaultObservationCap;

  // Throws ConfigError if the configuration cannot run `procedure`.
  void validate(Procedure procedure) const;
};

struct Elimination {
  int system = 0;
  int level = 0;        // 1 for the first system eliminated
  long long stage = 0;  // stage counter n when it was eliminated
};

struct RunOutcome {
  int selected = -1;
  std::vector<long long> per_system_counts;
  long long total_observations = 0;
  std::vector<Elimination> elimination_order;
  long long stages = 0;
};

// Survivors plus the per-system sample means used to pick who is eliminated.
struct ScreeningState {
  screening::SurvivorSet survivors;
  std::vector<double> sample_means;  // indexed by system id
};

// Statistic of the current survivor set.
using StatFn = std::function<double(const screening::SurvivorSet&)>;
// Threshold for the current survivor set of size s with multiplier η_s.
using ThresholdFn = std::function<double(const screening::SurvivorSet&, double eta_s)>;

// While statistic ≥ threshold, removes the survivor with the smallest sample
// mean (ties to the lowest id) and re-screens the shrunken set on the same
// data. Returns the removed ids in order.
std::vector<int> cascade_screen(ScreeningState& state, const eta::EtaSchedule& schedule,
                                const StatFn& stat_fn, const ThresholdFn& threshold_fn);

RunOutcome run_dk1(const ProcedureConfig& config, samplers::Sampler& sampler);
RunOutcome run_dk2(const ProcedureConfig& config, samplers::Sampler& sampler);
RunOutcome run_dk3(const ProcedureConfig& config, samplers::Sampler& sampler);
RunOutcome run_kn_known(const ProcedureConfig& config, samplers::Sampler& sampler);
RunOutcome run_kn_unknown(const ProcedureConfig& config, samplers::Sampler& sampler);

RunOutcome run_procedure(Procedure p, const ProcedureConfig& config, samplers::Sampler& sampler);

// h² = 2η with η = −ln(2α/(k−1)).
double kn_known_h2(int k, double alpha);
// η = ½[(2α/(k−1))^{−2/(n0−1)} − 1].
double kn_unknown_eta(int k, double alpha, long long n0);
// h² = 2cη(n0−1) with c = 1.
double kn_unknown_h2(int k, double alpha, long long n0);

}  // namespace spheresel::procedures
