#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numeric>
#include <random>

#include "spheresel/error.hpp"
#include "spheresel/procedures.hpp"
#include "spheresel/rng.hpp"
#include "spheresel/samplers.hpp"

using namespace spheresel;
using namespace spheresel::procedures;
using samplers::GaussianSampler;
using Catch::Approx;

namespace {

const eta::EtaSchedule& schedule_for(int k, double alpha = 0.1) {
  static std::map<std::pair<int, double>, eta::EtaSchedule> cache;
  static std::mutex mutex;
  std::lock_guard lock(mutex);
  auto it = cache.find({k, alpha});
  if (it == cache.end()) {
    eta::SolverSettings s;
    s.integration_intervals = 20'000;
    s.batch_size = 20'000;
    s.max_batches = 5;
    it = cache.emplace(std::make_pair(k, alpha), eta::build_schedule(k, alpha, eta::default_fit(alpha), s)).first;
  }
  return it->second;
}

eta::EtaSchedule flat_schedule(int k, double value) {
  eta::EtaSchedule s;
  s.k = k;
  s.alpha = 0.1;
  for (int size = k; size >= 2; --size) {
    s.entries.push_back({size, value, 0.01, eta::SolverKind::MonteCarlo});
  }
  return s;
}

ProcedureConfig config_for(Procedure p, int k, double delta, double sigma2, long long n0 = 30) {
  ProcedureConfig c;
  c.k = k;
  c.delta = delta;
  c.alpha = 0.1;
  c.n0 = needs_known_variance(p) ? 1 : n0;
  if (needs_known_variance(p)) c.known_sigma2 = sigma2;
  if (uses_schedule(p)) c.schedule = schedule_for(k);
  return c;
}

void check_invariants(const RunOutcome& r, int k) {
  REQUIRE(r.selected >= 0);
  REQUIRE(r.selected < k);
  REQUIRE(r.elimination_order.size() == static_cast<std::size_t>(k - 1));
  std::vector<int> seen;
  for (std::size_t i = 0; i < r.elimination_order.size(); ++i) {
    CHECK(r.elimination_order[i].level == static_cast<int>(i + 1));
    CHECK(r.elimination_order[i].system != r.selected);
    if (i > 0) CHECK(r.elimination_order[i].stage >= r.elimination_order[i - 1].stage);
    seen.push_back(r.elimination_order[i].system);
  }
  std::sort(seen.begin(), seen.end());
  CHECK(std::adjacent_find(seen.begin(), seen.end()) == seen.end());
  CHECK(r.total_observations ==
        std::accumulate(r.per_system_counts.begin(), r.per_system_counts.end(), 0LL));
}

constexpr Procedure kAll[] = {Procedure::DK1, Procedure::DK2, Procedure::DK3, Procedure::KN,
                              Procedure::KNUnknown};

}  // namespace

TEST_CASE("cascade eliminates twice on one set of sums", "[procedures]") {
  const double m = 100.0;
  ScreeningState state{screening::SurvivorSet::all(3), {0.0, 0.0, m}};
  eta::EtaSchedule schedule = flat_schedule(3, 2.0);
  schedule.entries[1].eta = 1.5;
  std::vector<double> stats;
  auto stat = [&](const screening::SurvivorSet& set) {
    std::vector<double> x;
    for (int i : set) x.push_back(state.sample_means[static_cast<std::size_t>(i)]);
    stats.push_back(screening::equal_variance_stat(x, 1.0));
    return stats.back();
  };
  auto threshold = [](const screening::SurvivorSet& set, double eta_s) {
    return eta_s * eta_s / screening::delta_squared(1.0, static_cast<long long>(set.size()));
  };
  const auto removed = cascade_screen(state, schedule, stat, threshold);
  CHECK(removed == std::vector<int>{0, 1});  // tie between 0 and 1 goes to the lower id
  CHECK(state.survivors.ids() == std::vector<int>{2});
  REQUIRE(stats.size() == 2);
  CHECK(stats[0] == Approx(2.0 * m * m / 3.0));
  CHECK(stats[1] == Approx(m * m / 2.0));
  // thresholds 6 and 4.5: M = 2.4 clears neither
  ScreeningState quiet{screening::SurvivorSet::all(3), {0.0, 0.0, 2.4}};
  auto quiet_stat = [&](const screening::SurvivorSet& set) {
    std::vector<double> x;
    for (int i : set) x.push_back(quiet.sample_means[static_cast<std::size_t>(i)]);
    return screening::equal_variance_stat(x, 1.0);
  };
  CHECK(cascade_screen(quiet, schedule, quiet_stat, threshold).empty());
}

TEST_CASE("cascade statistic never increases", "[procedures]") {
  std::mt19937_64 gen(8);
  std::normal_distribution<double> normal(0.0, 5.0);
  for (int rep = 0; rep < 500; ++rep) {
    const int k = 3 + rep % 6;
    ScreeningState state{screening::SurvivorSet::all(k), {}};
    for (int i = 0; i < k; ++i) state.sample_means.push_back(normal(gen));
    std::vector<double> stats;
    auto stat = [&](const screening::SurvivorSet& set) {
      std::vector<double> x;
      for (int i : set) x.push_back(state.sample_means[static_cast<std::size_t>(i)]);
      stats.push_back(screening::equal_variance_stat(x, 1.0));
      return stats.back();
    };
    auto threshold = [](const screening::SurvivorSet&, double eta_s) { return eta_s; };
    cascade_screen(state, flat_schedule(k, 0.5), stat, threshold);
    for (std::size_t i = 1; i < stats.size(); ++i) CHECK(stats[i] <= stats[i - 1] * (1 + 1e-12));
  }
}

TEST_CASE("wide separation always selects the best", "[procedures]") {
  for (Procedure p : kAll) {
    INFO(to_string(p));
    auto cfg = config_for(p, 2, 10.0, 1e-4);
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      GaussianSampler sampler({0.0, 10.0}, {1e-4, 1e-4}, seed);
      const auto r = run_procedure(p, cfg, sampler);
      check_invariants(r, 2);
      CHECK(r.selected == 1);
    }
  }
}

TEST_CASE("outcome invariants on noisy problems", "[procedures]") {
  for (Procedure p : kAll) {
    INFO(to_string(p));
    const int k = 6;
    auto cfg = config_for(p, k, 1.0, 4.0, 10);
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
      GaussianSampler sampler({1.0, 0, 0, 0, 0, 0}, std::vector<double>(k, 4.0), seed);
      check_invariants(run_procedure(p, cfg, sampler), k);
    }
  }
}

TEST_CASE("DK1 is exactly scale invariant", "[procedures]") {
  const int k = 8;
  const std::vector<double> means{0.3, 0, 0, 0, 0, 0, 0, 0};
  for (double c : {2.0, 0.25, 3.0}) {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      auto base_cfg = config_for(Procedure::DK1, k, 0.3, 1.0);
      auto scaled_cfg = base_cfg;
      scaled_cfg.delta = c * 0.3;
      scaled_cfg.known_sigma2 = c * c;
      GaussianSampler a(means, std::vector<double>(k, 1.0), seed);
      GaussianSampler b(means, std::vector<double>(k, 1.0), seed);
      samplers::AffineSampler scaled(b, c);
      const auto ra = run_dk1(base_cfg, a);
      const auto rb = run_dk1(scaled_cfg, scaled);
      INFO("c = " << c << ", seed = " << seed);
      CHECK(ra.selected == rb.selected);
      CHECK(ra.stages == rb.stages);
      CHECK(ra.per_system_counts == rb.per_system_counts);
      REQUIRE(ra.elimination_order.size() == rb.elimination_order.size());
      for (std::size_t i = 0; i < ra.elimination_order.size(); ++i) {
        CHECK(ra.elimination_order[i].system == rb.elimination_order[i].system);
        CHECK(ra.elimination_order[i].stage == rb.elimination_order[i].stage);
      }
    }
  }
}

TEST_CASE("relabeling systems relabels the selection", "[procedures]") {
  const int k = 5;
  const std::vector<double> means{0.0, 0.4, 1.5, 0.2, 0.9};
  const std::vector<double> vars(k, 1.0);
  const std::vector<int> perm{3, 0, 4, 1, 2};
  for (Procedure p : kAll) {
    INFO(to_string(p));
    const auto cfg = config_for(p, k, 0.5, 1.0, 10);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      GaussianSampler a(means, vars, seed);
      GaussianSampler b(means, vars, seed);
      samplers::PermutedSampler relabeled(b, perm);
      const auto ra = run_procedure(p, cfg, a);
      const auto rb = run_procedure(p, cfg, relabeled);
      CHECK(perm[static_cast<std::size_t>(rb.selected)] == ra.selected);
      CHECK(ra.total_observations == rb.total_observations);
    }
  }
}

TEST_CASE("DK2 pooled variance converges with n0", "[procedures]") {
  // Average |σ̂²_p − σ²| over the last two survivors at termination shrinks as
  // n0 grows. δ is large so that runs end soon after n0.
  const int k = 4;
  const double sigma2 = 100.0;
  std::vector<double> error;
  for (long long n0 : {2LL, 30LL, 200LL}) {
    auto cfg = config_for(Procedure::DK2, k, 10.0, sigma2, n0);
    double total = 0.0;
    const int runs = 300;
    for (int seed = 0; seed < runs; ++seed) {
      GaussianSampler live({10.0, 0, 0, 0}, std::vector<double>(k, sigma2), seed);
      samplers::RecordingSampler rec(live);
      const auto r = run_dk2(cfg, rec);
      const int last = r.elimination_order.back().system;
      screening::RunningStats a, b;
      for (const auto& o : rec.observations()) {
        if (o.system == r.selected) a.push(o.value);
        if (o.system == last) b.push(o.value);
      }
      total += std::abs(0.5 * (a.variance() + b.variance()) - sigma2);
    }
    error.push_back(total / runs);
  }
  INFO(error[0] << " " << error[1] << " " << error[2]);
  CHECK(error[1] < error[0]);
  CHECK(error[2] < error[1]);
}

TEST_CASE("DK3 pacing equalizes counts under equal variances", "[procedures]") {
  // The last two survivors share the same pacing rule until the end.
  const int k = 8;
  auto cfg = config_for(Procedure::DK3, k, 1.0, 100.0);
  double spread = 0.0;
  const int runs = 100;
  for (int seed = 0; seed < runs; ++seed) {
    GaussianSampler sampler({1.0, 0, 0, 0, 0, 0, 0, 0}, std::vector<double>(k, 100.0), seed);
    const auto r = run_dk3(cfg, sampler);
    const int last = r.elimination_order.back().system;
    const double a = static_cast<double>(r.per_system_counts[static_cast<std::size_t>(r.selected)]);
    const double b = static_cast<double>(r.per_system_counts[static_cast<std::size_t>(last)]);
    spread += std::abs(a - b) / (0.5 * (a + b));
  }
  CHECK(spread / runs <= 0.1);
}

TEST_CASE("DK3 samples high-variance systems more often", "[procedures]") {
  const int k = 8;
  std::vector<double> vars;
  for (int i = 1; i <= k; ++i) vars.push_back(10.0 * i);
  auto cfg = config_for(Procedure::DK3, k, 1.0, 0.0);
  std::vector<double> mean_counts(k, 0.0);
  for (int seed = 0; seed < 100; ++seed) {
    GaussianSampler sampler({1.0, 0, 0, 0, 0, 0, 0, 0}, vars, seed);
    const auto r = run_dk3(cfg, sampler);
    for (int i = 0; i < k; ++i) mean_counts[static_cast<std::size_t>(i)] += static_cast<double>(r.per_system_counts[static_cast<std::size_t>(i)]);
  }
  // Spearman rank correlation between system index and mean count.
  std::vector<int> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) { return mean_counts[static_cast<std::size_t>(a)] < mean_counts[static_cast<std::size_t>(b)]; });
  std::vector<double> rank(k);
  for (int r = 0; r < k; ++r) rank[static_cast<std::size_t>(order[static_cast<std::size_t>(r)])] = r;
  double d2 = 0.0;
  for (int i = 0; i < k; ++i) d2 += (rank[static_cast<std::size_t>(i)] - i) * (rank[static_cast<std::size_t>(i)] - i);
  const double rho = 1.0 - 6.0 * d2 / (k * (k * k - 1.0));
  INFO("rho = " << rho);
  CHECK(rho >= 0.9);
}

TEST_CASE("KN constants", "[procedures]") {
  CHECK(kn_known_h2(2, 0.1) == Approx(3.218876).margin(1e-6));
  CHECK(kn_unknown_eta(2, 0.1, 30) == Approx(0.5 * (std::pow(0.2, -2.0 / 29.0) - 1.0)).epsilon(1e-15));
  CHECK(kn_unknown_h2(2, 0.1, 30) == Approx(2.0 * 29.0 * kn_unknown_eta(2, 0.1, 30)));
}

TEST_CASE("configuration checks", "[procedures]") {
  auto cfg = config_for(Procedure::DK2, 4, 1.0, 1.0);
  cfg.n0 = 1;
  CHECK_THROWS_AS(cfg.validate(Procedure::DK2), ConfigError);
  auto dk1 = config_for(Procedure::DK1, 4, 1.0, 1.0);
  dk1.known_sigma2.reset();
  CHECK_THROWS_AS(dk1.validate(Procedure::DK1), ConfigError);
  auto mismatch = config_for(Procedure::DK1, 4, 1.0, 1.0);
  mismatch.schedule = schedule_for(3);
  CHECK_THROWS_AS(mismatch.validate(Procedure::DK1), ConfigError);
  GaussianSampler wrong({0, 0, 0}, {1, 1, 1}, 1);
  CHECK_THROWS_AS(run_dk1(config_for(Procedure::DK1, 4, 1.0, 1.0), wrong), ConfigError);
  CHECK(procedure_from_string("KN-UNK") == Procedure::KNUnknown);
  CHECK_THROWS_AS(procedure_from_string("BIZ"), ConfigError);
}

TEST_CASE("observation cap is an error", "[procedures]") {
  for (Procedure p : kAll) {
    auto cfg = config_for(p, 4, 0.01, 100.0, 5);
    cfg.max_total_observations = 500;
    GaussianSampler sampler({0.01, 0, 0, 0}, {100, 100, 100, 100}, 4);
    INFO(to_string(p));
    CHECK_THROWS_AS(run_procedure(p, cfg, sampler), std::runtime_error);
  }
}
