#include "spheresel/procedures.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "spheresel/error.hpp"

namespace spheresel::procedures {

namespace {

using screening::RunningStats;
using screening::SurvivorSet;

// Observation bookkeeping shared by all procedures.
class RunState {
 public:
  RunState(const ProcedureConfig& config, samplers::Sampler& sampler, bool track_variance)
      : config_(config),
        sampler_(sampler),
        sums(static_cast<std::size_t>(config.k), 0.0),
        stats(track_variance ? static_cast<std::size_t>(config.k) : 0),
        survivors(SurvivorSet::all(config.k)) {
    if (sampler.systems() != config.k) {
      throw ConfigError("sampler has " + std::to_string(sampler.systems()) +
                        " systems, procedure expects " + std::to_string(config.k));
    }
    out.per_system_counts.assign(static_cast<std::size_t>(config.k), 0);
  }

  double observe(int i) {
    const double x = sampler_.draw_one(i);
    const auto u = static_cast<std::size_t>(i);
    sums[u] += x;
    ++out.per_system_counts[u];
    if (!stats.empty()) stats[u].push(x);
    if (++out.total_observations > config_.max_total_observations) {
      throw std::runtime_error("observation cap of " +
                               std::to_string(config_.max_total_observations) + " exceeded");
    }
    return x;
  }

  long long count(int i) const { return out.per_system_counts[static_cast<std::size_t>(i)]; }

  double variance(int i) const {
    return screening::clamp_variance(stats[static_cast<std::size_t>(i)].variance());
  }

  void record(int system) {
    const int level = config_.k - static_cast<int>(survivors.size()) + 1;
    out.elimination_order.push_back({system, level, stage});
    survivors.remove(system);
  }

  RunOutcome finish() {
    out.selected = survivors[0];
    out.stages = stage;
    return std::move(out);
  }

  std::vector<double> gather(const SurvivorSet& set, const std::vector<double>& by_id) const {
    std::vector<double> v;
    v.reserve(set.size());
    for (int i : set) v.push_back(by_id[static_cast<std::size_t>(i)]);
    return v;
  }

  double pooled(const SurvivorSet& set) const {
    double total = 0.0;
    for (int i : set) total += variance(i);
    return total / static_cast<double>(set.size());
  }

  const ProcedureConfig& config_;
  samplers::Sampler& sampler_;
  std::vector<double> sums;
  std::vector<RunningStats> stats;
  SurvivorSet survivors;
  RunOutcome out;
  long long stage = 0;
};

int argmin_mean(const SurvivorSet& set, const std::vector<double>& means) {
  int best = -1;
  double lowest = std::numeric_limits<double>::infinity();
  for (int i : set) {
    const double m = means[static_cast<std::size_t>(i)];
    if (best < 0 || m < lowest || (m == lowest && i < best)) {
      best = i;
      lowest = m;
    }
  }
  return best;
}

// Screening shared by DK1 and DK2: all survivors have the same count, so the
// cumulative sums order the sample means.
void screen_equal_counts(RunState& st, const std::function<double(const SurvivorSet&)>& sigma2) {
  const auto& cfg = st.config_;
  ScreeningState state{st.survivors, st.sums};
  auto stat = [&](const SurvivorSet& set) {
    return screening::equal_variance_stat(st.gather(set, st.sums), sigma2(set));
  };
  auto threshold = [&](const SurvivorSet& set, double eta_s) {
    const double d2 = screening::delta_squared(cfg.delta, static_cast<long long>(set.size()));
    return sigma2(set) * eta_s * eta_s / d2;
  };
  for (int id : cascade_screen(state, cfg.schedule, stat, threshold)) st.record(id);
}

// Sorted (ascending sum, then id) list of systems to drop this KN stage.
std::vector<int> order_by_sum(std::vector<int> ids, const std::vector<double>& sums) {
  std::sort(ids.begin(), ids.end(), [&](int a, int b) {
    const double sa = sums[static_cast<std::size_t>(a)];
    const double sb = sums[static_cast<std::size_t>(b)];
    return sa < sb || (sa == sb && a < b);
  });
  return ids;
}

}  // namespace

std::string_view to_string(Procedure p) {
  switch (p) {
    case Procedure::DK1:
      return "DK1";
    case Procedure::DK2:
      return "DK2";
    case Procedure::DK3:
      return "DK3";
    case Procedure::KN:
      return "KN";
    case Procedure::KNUnknown:
      return "KN-UNK";
  }
  return "unknown";
}

Procedure procedure_from_string(std::string_view text) {
  if (text == "DK1") return Procedure::DK1;
  if (text == "DK2") return Procedure::DK2;
  if (text == "DK3") return Procedure::DK3;
  if (text == "KN") return Procedure::KN;
  if (text == "KN-UNK") return Procedure::KNUnknown;
  throw ConfigError("unknown procedure '" + std::string(text) + "' (DK1, DK2, DK3, KN, KN-UNK)");
}

bool uses_schedule(Procedure p) {
  return p == Procedure::DK1 || p == Procedure::DK2 || p == Procedure::DK3;
}

bool needs_known_variance(Procedure p) { return p == Procedure::DK1 || p == Procedure::KN; }

void ProcedureConfig::validate(Procedure procedure) const {
  if (k < 2) throw ConfigError("k must be >= 2");
  if (!(delta > 0.0) || !std::isfinite(delta)) throw ConfigError("delta must be > 0");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must be in (0, 1)");
  if (b_z < 1) throw ConfigError("b_z must be >= 1");
  if (max_total_observations < 1) throw ConfigError("observation cap must be >= 1");
  const long long min_n0 = needs_known_variance(procedure) ? 1 : 2;
  if (n0 < min_n0) {
    throw ConfigError(std::string(to_string(procedure)) + " requires n0 >= " +
                      std::to_string(min_n0));
  }
  if (needs_known_variance(procedure) && !(known_sigma2 && *known_sigma2 > 0.0)) {
    throw ConfigError(std::string(to_string(procedure)) + " requires a known common variance");
  }
  if (uses_schedule(procedure)) {
    if (schedule.k != k || schedule.alpha != alpha) {
      throw ConfigError("schedule (k=" + std::to_string(schedule.k) +
                        ", alpha=" + std::to_string(schedule.alpha) +
                        ") does not match the procedure (k=" + std::to_string(k) +
                        ", alpha=" + std::to_string(alpha) + ")");
    }
    schedule.validate();
  }
}

std::vector<int> cascade_screen(ScreeningState& state, const eta::EtaSchedule& schedule,
                                const StatFn& stat_fn, const ThresholdFn& threshold_fn) {
  std::vector<int> removed;
  while (state.survivors.size() >= 2) {
    const auto s = static_cast<long long>(state.survivors.size());
    if (stat_fn(state.survivors) < threshold_fn(state.survivors, schedule.eta(s))) break;
    const int worst = argmin_mean(state.survivors, state.sample_means);
    state.survivors.remove(worst);
    removed.push_back(worst);
  }
  return removed;
}

RunOutcome run_dk1(const ProcedureConfig& config, samplers::Sampler& sampler) {
  config.validate(Procedure::DK1);
  RunState st(config, sampler, false);
  const double sigma2 = *config.known_sigma2;
  auto known = [sigma2](const SurvivorSet&) { return sigma2; };
  for (long long n = 1; n < config.n0; ++n) {
    for (int i = 0; i < config.k; ++i) st.observe(i);
  }
  st.stage = config.n0 - 1;
  while (st.survivors.size() > 1) {
    ++st.stage;
    for (int i : st.survivors) st.observe(i);
    if (st.stage >= config.n0) screen_equal_counts(st, known);
  }
  return st.finish();
}

RunOutcome run_dk2(const ProcedureConfig& config, samplers::Sampler& sampler) {
  config.validate(Procedure::DK2);
  RunState st(config, sampler, true);
  auto pooled = [&st](const SurvivorSet& set) { return st.pooled(set); };
  while (st.survivors.size() > 1) {
    ++st.stage;
    for (int i : st.survivors) st.observe(i);
    if (st.stage >= config.n0) screen_equal_counts(st, pooled);
  }
  return st.finish();
}

RunOutcome run_dk3(const ProcedureConfig& config, samplers::Sampler& sampler) {
  config.validate(Procedure::DK3);
  RunState st(config, sampler, true);
  for (int i = 0; i < config.k; ++i) {
    for (long long j = 0; j < config.n0; ++j) st.observe(i);
  }
  st.stage = config.n0;

  std::vector<double> means(static_cast<std::size_t>(config.k), 0.0);
  std::vector<double> vars(static_cast<std::size_t>(config.k), 0.0);
  std::vector<long long> counts(static_cast<std::size_t>(config.k), 0);
  auto lambda2 = [&](const SurvivorSet& set) {
    return screening::lambda_hat_squared(st.gather(set, vars), [&] {
      std::vector<long long> c;
      c.reserve(set.size());
      for (int i : set) c.push_back(counts[static_cast<std::size_t>(i)]);
      return c;
    }());
  };
  auto stat = [&](const SurvivorSet& set) {
    return screening::equal_variance_stat(st.gather(set, means), lambda2(set));
  };
  auto threshold = [&](const SurvivorSet& set, double eta_s) {
    const double d2 = screening::delta_squared(config.delta, static_cast<long long>(set.size()));
    return lambda2(set) * eta_s * eta_s / d2;
  };

  for (;;) {
    for (int i : st.survivors) {
      const auto u = static_cast<std::size_t>(i);
      counts[u] = st.count(i);
      means[u] = st.sums[u] / static_cast<double>(counts[u]);
      vars[u] = st.variance(i);
    }
    ScreeningState state{st.survivors, means};
    for (int id : cascade_screen(state, config.schedule, stat, threshold)) st.record(id);
    if (st.survivors.size() == 1) break;

    int z = -1;
    double best_ratio = std::numeric_limits<double>::infinity();
    for (int i : st.survivors) {
      const auto u = static_cast<std::size_t>(i);
      const double ratio = static_cast<double>(counts[u]) / vars[u];
      if (z < 0 || ratio < best_ratio) {
        z = i;
        best_ratio = ratio;
      }
    }
    const auto uz = static_cast<std::size_t>(z);
    const double paced = static_cast<double>(counts[uz] + config.b_z);
    for (int i : st.survivors) {
      const auto u = static_cast<std::size_t>(i);
      const double want = (i == z) ? paced : std::ceil(vars[u] * paced / vars[uz]);
      if (!(want < static_cast<double>(config.max_total_observations))) {
        throw std::runtime_error("pacing rule requested more than the observation cap");
      }
      const auto delta_i = static_cast<long long>(want);
      for (long long j = counts[u]; j < delta_i; ++j) st.observe(i);
    }
    ++st.stage;
  }
  return st.finish();
}

double kn_known_h2(int k, double alpha) {
  if (k < 2 || !(alpha > 0.0 && alpha < 1.0)) throw DomainError("kn_known_h2: bad k or alpha");
  return 2.0 * -std::log(2.0 * alpha / static_cast<double>(k - 1));
}

double kn_unknown_eta(int k, double alpha, long long n0) {
  if (k < 2 || !(alpha > 0.0 && alpha < 1.0) || n0 < 2) {
    throw DomainError("kn_unknown_eta: bad k, alpha or n0");
  }
  const double base = 2.0 * alpha / static_cast<double>(k - 1);
  return 0.5 * (std::pow(base, -2.0 / static_cast<double>(n0 - 1)) - 1.0);
}

double kn_unknown_h2(int k, double alpha, long long n0) {
  constexpr double c = 1.0;
  return 2.0 * c * kn_unknown_eta(k, alpha, n0) * static_cast<double>(n0 - 1);
}

RunOutcome run_kn_known(const ProcedureConfig& config, samplers::Sampler& sampler) {
  config.validate(Procedure::KN);
  RunState st(config, sampler, false);
  const double h2 = kn_known_h2(config.k, config.alpha);
  const double s2 = 2.0 * *config.known_sigma2;
  const double intercept = h2 * s2 / (2.0 * config.delta);
  const double slope = config.delta / 2.0;
  for (long long n = 1; n < config.n0; ++n) {
    for (int i = 0; i < config.k; ++i) st.observe(i);
  }
  st.stage = config.n0 - 1;
  while (st.survivors.size() > 1) {
    ++st.stage;
    for (int i : st.survivors) st.observe(i);
    if (st.stage < config.n0) continue;
    const double w = std::max(0.0, intercept - slope * static_cast<double>(st.stage));
    double top = -std::numeric_limits<double>::infinity();
    for (int i : st.survivors) top = std::max(top, st.sums[static_cast<std::size_t>(i)]);
    std::vector<int> out;
    for (int i : st.survivors) {
      if (st.sums[static_cast<std::size_t>(i)] - top < -w) out.push_back(i);
    }
    for (int id : order_by_sum(std::move(out), st.sums)) st.record(id);
  }
  return st.finish();
}

RunOutcome run_kn_unknown(const ProcedureConfig& config, samplers::Sampler& sampler) {
  config.validate(Procedure::KNUnknown);
  RunState st(config, sampler, false);
  const int k = config.k;
  const auto n0 = static_cast<std::size_t>(config.n0);
  std::vector<std::vector<double>> first(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    auto& row = first[static_cast<std::size_t>(i)];
    row.reserve(n0);
    for (std::size_t j = 0; j < n0; ++j) row.push_back(st.observe(i));
  }
  // S²_iℓ, i < ℓ, packed row-major.
  auto tri = [k](int i, int l) {
    if (i > l) std::swap(i, l);
    return static_cast<std::size_t>(i) * static_cast<std::size_t>(k) -
           static_cast<std::size_t>(i) * static_cast<std::size_t>(i + 1) / 2 +
           static_cast<std::size_t>(l - i - 1);
  };
  std::vector<double> s2(static_cast<std::size_t>(k) * static_cast<std::size_t>(k - 1) / 2);
  for (int i = 0; i < k; ++i) {
    for (int l = i + 1; l < k; ++l) {
      RunningStats d;
      for (std::size_t j = 0; j < n0; ++j) {
        d.push(first[static_cast<std::size_t>(i)][j] - first[static_cast<std::size_t>(l)][j]);
      }
      s2[tri(i, l)] = d.variance();
    }
  }
  first.clear();

  constexpr double c = 1.0;
  const double h2 = kn_unknown_h2(k, config.alpha, config.n0);
  st.stage = config.n0;
  for (;;) {
    const double n = static_cast<double>(st.stage);
    std::vector<int> out;
    for (int i : st.survivors) {
      for (int l : st.survivors) {
        if (l == i) continue;
        const double w =
            std::max(0.0, h2 * s2[tri(i, l)] / (2.0 * c * config.delta) - config.delta / (2.0 * c) * n);
        if (st.sums[static_cast<std::size_t>(i)] - st.sums[static_cast<std::size_t>(l)] < -w) {
          out.push_back(i);
          break;
        }
      }
    }
    for (int id : order_by_sum(std::move(out), st.sums)) st.record(id);
    if (st.survivors.size() == 1) break;
    ++st.stage;
    for (int i : st.survivors) st.observe(i);
  }
  return st.finish();
}

RunOutcome run_procedure(Procedure p, const ProcedureConfig& config, samplers::Sampler& sampler) {
  switch (p) {
    case Procedure::DK1:
      return run_dk1(config, sampler);
    case Procedure::DK2:
      return run_dk2(config, sampler);
    case Procedure::DK3:
      return run_dk3(config, sampler);
    case Procedure::KN:
      return run_kn_known(config, sampler);
    case Procedure::KNUnknown:
      return run_kn_unknown(config, sampler);
  }
  throw ConfigError("unknown procedure");
}

}  // namespace spheresel::procedures
