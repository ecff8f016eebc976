#include "spheresel/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <mutex>
#include <ostream>
#include <thread>

#include "spheresel/error.hpp"
#include "spheresel/rng.hpp"
#include "spheresel/samplers.hpp"

namespace spheresel::harness {

namespace {

using procedures::Procedure;

// Runs body(rep, acc) for rep in [0, reps) on `threads` workers, each with its
// own accumulator; returns the accumulators for merging. The first failing
// replication (lowest index) is rethrown as ReplicationError.
template <class Acc, class Body>
std::vector<Acc> parallel_reps(long long reps, unsigned threads, const Acc& init, Body body) {
  const unsigned n_threads = std::max<unsigned>(
      1, static_cast<unsigned>(std::min<long long>(threads == 0 ? 1 : threads, reps)));
  std::vector<Acc> accs(n_threads, init);
  std::atomic<long long> next{0};
  std::atomic<long long> first_failure{std::numeric_limits<long long>::max()};
  std::mutex error_mutex;
  std::string error_text;

  auto worker = [&](unsigned t) {
    for (long long rep = next++; rep < reps; rep = next++) {
      if (rep > first_failure.load()) break;
      try {
        body(rep, accs[t]);
      } catch (const std::exception& e) {
        std::lock_guard lock(error_mutex);
        if (rep < first_failure.load()) {
          first_failure = rep;
          error_text = e.what();
        }
      }
    }
  };
  if (n_threads == 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker, t);
    for (auto& th : pool) th.join();
  }
  if (first_failure.load() != std::numeric_limits<long long>::max()) {
    throw ReplicationError("replication " + std::to_string(first_failure.load()) + ": " + error_text,
                           first_failure.load());
  }
  return accs;
}

std::vector<double> variance_profile(const std::string& kind, int k) {
  std::vector<double> v(static_cast<std::size_t>(k));
  const double km1 = static_cast<double>(k - 1);
  for (int i = 1; i <= k; ++i) {
    double sd_factor = 1.0;
    if (kind == "Equal") {
      v[static_cast<std::size_t>(i - 1)] = 100.0;
      continue;
    }
    if (kind == "INC") sd_factor = 1.0 + 3.0 * (i - 1) / km1;
    if (kind == "DEC") sd_factor = 1.0 + 3.0 * (k - i) / km1;
    v[static_cast<std::size_t>(i - 1)] = 25.0 * sd_factor * sd_factor;
  }
  return v;
}

}  // namespace

bool ScenarioConfig::equal_variances() const {
  return !variances.empty() &&
         std::all_of(variances.begin(), variances.end(),
                     [&](double v) { return v == variances.front(); });
}

void ScenarioConfig::validate() const {
  if (k < 2) throw ConfigError("scenario: k must be >= 2");
  if (means.size() != static_cast<std::size_t>(k) || variances.size() != means.size()) {
    throw ConfigError("scenario: means and variances must both have k entries");
  }
  for (double v : variances) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError("scenario: variances must be > 0");
  }
  for (double m : means) {
    if (!std::isfinite(m)) throw ConfigError("scenario: means must be finite");
  }
  if (!(delta > 0.0)) throw ConfigError("scenario: delta must be > 0");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("scenario: alpha must be in (0, 1)");
  if (n0 < 1) throw ConfigError("scenario: n0 must be >= 1");
  if (macro_reps < 1) throw ConfigError("scenario: macro_reps must be >= 1");
}

void identify_best(ScenarioConfig& scenario) {
  const auto& m = scenario.means;
  if (m.empty()) throw ConfigError("scenario: no means");
  const auto it = std::max_element(m.begin(), m.end());
  scenario.best = static_cast<int>(it - m.begin());
  double runner_up = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (static_cast<int>(i) != scenario.best) runner_up = std::max(runner_up, m[i]);
  }
  const double gap = *it - runner_up;
  scenario.outside_iz = !(gap >= scenario.delta * (1.0 - 1e-12));
}

ScenarioConfig make_scenario(const std::string& name, int k, const ScenarioOverrides& o) {
  if (k < 2) throw ConfigError("scenario: k must be >= 2");
  ScenarioConfig sc;
  sc.name = name;
  sc.k = k;
  if (o.delta) sc.delta = *o.delta;
  if (o.alpha) sc.alpha = *o.alpha;
  if (o.n0) sc.n0 = *o.n0;
  if (o.macro_reps) sc.macro_reps = *o.macro_reps;
  if (o.seed) sc.seed = *o.seed;

  if (name != "custom") {
    const auto dash = name.find('-');
    const std::string means_kind = name.substr(0, dash);
    const std::string var_kind = dash == std::string::npos ? "" : name.substr(dash + 1);
    if ((means_kind != "SC" && means_kind != "MDM") ||
        (var_kind != "Equal" && var_kind != "INC" && var_kind != "DEC")) {
      throw ConfigError("unknown scenario '" + name +
                        "' (SC-Equal, MDM-Equal, SC-INC, SC-DEC, MDM-INC, MDM-DEC, custom)");
    }
    sc.means.assign(static_cast<std::size_t>(k), 0.0);
    if (means_kind == "SC") {
      sc.means[0] = sc.delta;
    } else {
      for (int i = 1; i <= k; ++i) sc.means[static_cast<std::size_t>(i - 1)] = -sc.delta * i;
    }
    sc.variances = variance_profile(var_kind, k);
  }
  if (o.means) sc.means = *o.means;
  if (o.variances) sc.variances = *o.variances;
  if (name == "custom" && (!o.means || !o.variances)) {
    throw ConfigError("custom scenario needs both means and variances");
  }
  sc.validate();
  identify_best(sc);
  return sc;
}

procedures::ProcedureConfig make_procedure_config(const ScenarioConfig& scenario,
                                                  Procedure procedure,
                                                  const eta::EtaSchedule* schedule) {
  scenario.validate();
  procedures::ProcedureConfig cfg;
  cfg.k = scenario.k;
  cfg.delta = scenario.delta;
  cfg.alpha = scenario.alpha;
  cfg.n0 = scenario.n0;
  if (procedures::needs_known_variance(procedure)) {
    if (!scenario.equal_variances()) {
      throw ConfigError(std::string(procedures::to_string(procedure)) +
                        " needs a common known variance but scenario '" + scenario.name +
                        "' has unequal variances");
    }
    cfg.known_sigma2 = scenario.variances.front();
    cfg.n0 = 1;
  }
  if (procedures::uses_schedule(procedure)) {
    if (schedule == nullptr) throw ConfigError("procedure needs an eta schedule");
    cfg.schedule = *schedule;
  }
  cfg.validate(procedure);
  return cfg;
}

MacroSummary run_macro_experiment(const ScenarioConfig& scenario, Procedure procedure,
                                  const eta::EtaSchedule* schedule,
                                  const ExperimentOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  auto cfg = make_procedure_config(scenario, procedure, schedule);
  cfg.max_total_observations = options.observation_cap;
  if (scenario.best < 0) throw ConfigError("scenario has no identified best system");

  struct Acc {
    long long correct = 0;
    long long observations = 0;
    unsigned __int128 observations_sq = 0;
    std::vector<long long> ics;
  };
  Acc init;
  init.ics.assign(static_cast<std::size_t>(scenario.k - 1), 0);

  auto accs = parallel_reps(scenario.macro_reps, options.threads, init, [&](long long rep, Acc& acc) {
    samplers::GaussianSampler sampler(scenario.means, scenario.variances,
                                      rng::derive_seed(scenario.seed, static_cast<std::uint64_t>(rep)));
    const auto outcome = procedures::run_procedure(procedure, cfg, sampler);
    acc.observations += outcome.total_observations;
    const auto n = static_cast<unsigned __int128>(outcome.total_observations);
    acc.observations_sq += n * n;
    if (outcome.selected == scenario.best) {
      ++acc.correct;
      return;
    }
    for (const auto& e : outcome.elimination_order) {
      if (e.system == scenario.best) {
        ++acc.ics[static_cast<std::size_t>(e.level - 1)];
        break;
      }
    }
  });

  MacroSummary out;
  out.macro_reps = scenario.macro_reps;
  out.per_level_ics_counts = init.ics;
  unsigned __int128 sum_sq = 0;
  for (const auto& a : accs) {
    out.correct += a.correct;
    out.total_observations += a.observations;
    sum_sq += a.observations_sq;
    for (std::size_t l = 0; l < a.ics.size(); ++l) out.per_level_ics_counts[l] += a.ics[l];
  }
  const double reps = static_cast<double>(out.macro_reps);
  out.pcs = static_cast<double>(out.correct) / reps;
  out.pcs_se = std::sqrt(out.pcs * (1.0 - out.pcs) / reps);
  out.rep_per_k = static_cast<double>(out.total_observations) / (reps * scenario.k);
  if (out.macro_reps > 1) {
    // exact centred sum of squares: Σn² − (Σn)²/R, formed as (RΣn² − (Σn)²)/R
    const auto total = static_cast<unsigned __int128>(out.total_observations);
    const auto r = static_cast<unsigned __int128>(out.macro_reps);
    const double centred = static_cast<double>(r * sum_sq - total * total) / reps;
    const double var = centred / (reps - 1.0);
    out.rep_per_k_se = std::sqrt(var / reps) / scenario.k;
  }
  out.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

LevelProfile profile_from_summary(const MacroSummary& summary, int k) {
  LevelProfile p;
  p.macro_reps = summary.macro_reps;
  p.ics_counts = summary.per_level_ics_counts;
  for (std::size_t l = 0; l < p.ics_counts.size(); ++l) {
    p.frequencies.push_back(static_cast<double>(p.ics_counts[l]) /
                            static_cast<double>(p.macro_reps));
    p.standardized.push_back(static_cast<double>(l + 1) / k);
  }
  return p;
}

LevelProfile level_error_profile(const ScenarioConfig& scenario, const eta::EtaSchedule& schedule,
                                 const ExperimentOptions& options) {
  const auto summary = run_macro_experiment(scenario, Procedure::DK1, &schedule, options);
  return profile_from_summary(summary, scenario.k);
}

LevelProfile level_error_profile(const ScenarioConfig& scenario, bool uniform_beta,
                                 const eta::SolverSettings& settings,
                                 const ExperimentOptions& options) {
  const auto fit = uniform_beta ? eta::kUniformFit : eta::default_fit(scenario.alpha);
  const auto schedule =
      eta::build_schedule(scenario.k, scenario.alpha, fit, settings, options.threads);
  return level_error_profile(scenario, schedule, options);
}

OracleEstimate bm_first_elimination_oracle(int k, double eta, double delta, double sigma,
                                           double step, long long reps, std::uint64_t seed,
                                           unsigned threads) {
  if (k < 3 || k > 6) throw DomainError("bm oracle: k must lie in [3, 6]");
  if (!(step > 0.0)) throw DomainError("bm oracle: step must be > 0");
  if (reps < 1) throw DomainError("bm oracle: reps must be >= 1");
  if (!(eta > 0.0) || !(delta > 0.0) || !(sigma > 0.0)) {
    throw DomainError("bm oracle: eta, delta and sigma must be > 0");
  }
  const double delta_k = delta * std::sqrt(static_cast<double>(k - 1) / k);
  const double radius2 = std::pow(sigma * eta / delta_k, 2);
  const double sd = sigma * std::sqrt(step);
  const double drift = delta * step;
  const auto ku = static_cast<std::size_t>(k);

  struct Acc {
    long long hits = 0;
    long long steps = 0;
  };
  auto accs = parallel_reps(reps, threads, Acc{}, [&](long long rep, Acc& acc) {
    rng::NormalStream stream(rng::derive_seed(seed, static_cast<std::uint64_t>(rep)));
    double x[6] = {0, 0, 0, 0, 0, 0};
    for (;;) {
      ++acc.steps;
      double total = 0.0;
      for (std::size_t i = 0; i < ku; ++i) {
        x[i] += sd * stream.next();
        total += x[i];
      }
      x[ku - 1] += drift;
      total += drift;
      const double mean = total / k;
      double norm2 = 0.0;
      for (std::size_t i = 0; i < ku; ++i) norm2 += (x[i] - mean) * (x[i] - mean);
      if (norm2 >= radius2) break;
    }
    const double last = x[ku - 1];
    bool is_min = true;
    for (std::size_t i = 0; i + 1 < ku; ++i) is_min = is_min && last < x[i];
    if (is_min) ++acc.hits;
  });

  long long hits = 0, steps = 0;
  for (const auto& a : accs) {
    hits += a.hits;
    steps += a.steps;
  }
  OracleEstimate out;
  out.reps = reps;
  out.probability = static_cast<double>(hits) / static_cast<double>(reps);
  out.standard_error = std::sqrt(out.probability * (1.0 - out.probability) / reps);
  out.mean_steps = static_cast<double>(steps) / static_cast<double>(reps);
  return out;
}

void write_results_row(std::ostream& out, const ScenarioConfig& scenario, Procedure procedure,
                       long long n0, const MacroSummary& s) {
  char buf[512];
  std::snprintf(buf, sizeof buf, "%s,%s,%d,%.17g,%.17g,%lld,%lld,%.6f,%.6f,%.4f,%llu\n",
                scenario.name.c_str(), std::string(procedures::to_string(procedure)).c_str(),
                scenario.k, scenario.alpha, scenario.delta, n0, s.macro_reps, s.pcs, s.pcs_se,
                s.rep_per_k, static_cast<unsigned long long>(scenario.seed));
  out << buf;
}

void write_level_profile(std::ostream& out, const LevelProfile& profile) {
  out << kLevelProfileHeader << '\n';
  char buf[128];
  for (std::size_t l = 0; l < profile.ics_counts.size(); ++l) {
    std::snprintf(buf, sizeof buf, "%zu,%.6f,%lld\n", l + 1, profile.standardized[l],
                  profile.ics_counts[l]);
    out << buf;
  }
}

}  // namespace spheresel::harness
