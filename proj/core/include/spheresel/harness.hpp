#pragma once

// Experiment harness: named mean/variance configurations, macro-replication
// runs, per-level incorrect-selection profiles and a discretized Brownian
// motion oracle for the level-1 elimination probability.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "spheresel/eta.hpp"
#include "spheresel/procedures.hpp"

namespace spheresel::harness {

struct ScenarioConfig {
  std::string name = "custom";
  int k = 0;
  std::vector<double> means;
  std::vector<double> variances;
  double delta = 1.0;
  double alpha = 0.1;
  long long n0 = 30;
  long long macro_reps = 10'000;
  std::uint64_t seed = 20'150'611;

  int best = -1;             // index of the largest mean
  bool outside_iz = false;   // best does not beat the rest by ≥ δ

  bool equal_variances() const;
  void validate() const;
};

struct ScenarioOverrides {
  std::optional<double> delta;
  std::optional<double> alpha;
  std::optional<long long> n0;
  std::optional<long long> macro_reps;
  std::optional<std::uint64_t> seed;
  std::optional<std::vector<double>> means;
  std::optional<std::vector<double>> variances;
};

// Names: SC-Equal, MDM-Equal, SC-INC, SC-DEC, MDM-INC, MDM-DEC, custom.
//   SC means (δ, 0, ..., 0); MDM means μ_i = −δi
//   Equal σ² = 100; INC σ²_i = 25(1+3(i−1)/(k−1))²; DEC σ²_i = 25(1+3(k−i)/(k−1))²
ScenarioConfig make_scenario(const std::string& name, int k, const ScenarioOverrides& overrides = {});

// Recomputes `best` and `outside_iz` from the mean vector.
void identify_best(ScenarioConfig& scenario);

// Procedure configuration for a scenario. DK1 and KN take n0 = 1 and the
// common variance, and reject scenarios with unequal variances.
procedures::ProcedureConfig make_procedure_config(const ScenarioConfig& scenario,
                                                  procedures::Procedure procedure,
                                                  const eta::EtaSchedule* schedule);

struct MacroSummary {
  long long macro_reps = 0;
  long long correct = 0;
  double pcs = 0.0;
  double pcs_se = 0.0;
  double rep_per_k = 0.0;
  double rep_per_k_se = 0.0;  // standard error of rep_per_k across replications
  long long total_observations = 0;
  std::vector<long long> per_level_ics_counts;  // index ℓ−1
  double wall_time = 0.0;                       // seconds
};

struct ExperimentOptions {
  unsigned threads = 1;
  long long observation_cap = procedures::kDefaultObservationCap;  // per replication
};

// Replication r draws from GaussianSampler(means, variances,
// derive_seed(scenario.seed, r)). Throws ReplicationError on failure.
MacroSummary run_macro_experiment(const ScenarioConfig& scenario, procedures::Procedure procedure,
                                  const eta::EtaSchedule* schedule,
                                  const ExperimentOptions& options = {});

struct LevelProfile {
  long long macro_reps = 0;
  std::vector<long long> ics_counts;   // index ℓ−1
  std::vector<double> frequencies;     // ics_counts / macro_reps
  std::vector<double> standardized;    // ℓ/k
};

LevelProfile profile_from_summary(const MacroSummary& summary, int k);

// DK1 on `scenario` with the given schedule.
LevelProfile level_error_profile(const ScenarioConfig& scenario, const eta::EtaSchedule& schedule,
                                 const ExperimentOptions& options = {});
// Builds the schedule first: uniform_beta solves every level at β₀ = α/(k−1),
// otherwise the level-adjusted targets of the default fit are used.
LevelProfile level_error_profile(const ScenarioConfig& scenario, bool uniform_beta,
                                 const eta::SolverSettings& settings,
                                 const ExperimentOptions& options = {});

struct OracleEstimate {
  double probability = 0.0;
  double standard_error = 0.0;
  long long reps = 0;
  double mean_steps = 0.0;
};

// Random walk on R^k with N(0, σ² step) increments and drift δ·step on the
// last coordinate, centred to the hyperplane Σx = 0, stopped when its norm
// reaches r = ση/δ_k. Returns how often the last coordinate is the minimum at
// exit. 3 ≤ k ≤ 6.
OracleEstimate bm_first_elimination_oracle(int k, double eta, double delta, double sigma,
                                           double step, long long reps, std::uint64_t seed,
                                           unsigned threads = 1);

inline constexpr const char* kResultsHeader =
    "scenario,procedure,k,alpha,delta,n0,macro_reps,pcs,pcs_se,rep_per_k,seed";
inline constexpr const char* kLevelProfileHeader = "level,standardized_level,ics_count";

void write_results_row(std::ostream& out, const ScenarioConfig& scenario,
                       procedures::Procedure procedure, long long n0, const MacroSummary& summary);
void write_level_profile(std::ostream& out, const LevelProfile& profile);

}  // namespace spheresel::harness
