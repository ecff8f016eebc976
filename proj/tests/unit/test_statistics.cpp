#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "spheresel/eta.hpp"
#include "spheresel/harness.hpp"
#include "spheresel/procedures.hpp"
#include "spheresel/rng.hpp"
#include "spheresel/samplers.hpp"

using namespace spheresel;
using namespace spheresel::harness;
using procedures::Procedure;
using Catch::Approx;

namespace {

eta::SolverSettings quick_settings() {
  eta::SolverSettings s;
  s.integration_intervals = 20'000;
  s.batch_size = 20'000;
  s.max_batches = 5;
  return s;
}

double decile_mass(const LevelProfile& p, double from, double to) {
  double total = 0.0;
  for (std::size_t l = 0; l < p.frequencies.size(); ++l) {
    if (p.standardized[l] > from && p.standardized[l] <= to) total += p.frequencies[l];
  }
  return total;
}

}  // namespace

TEST_CASE("summary statistics match a direct recomputation", "[statistics]") {
  const int k = 6;
  const auto schedule = eta::build_schedule(k, 0.1, eta::default_fit(0.1), quick_settings());
  for (Procedure p : {Procedure::DK2, Procedure::DK3, Procedure::KNUnknown}) {
    const auto sc = make_scenario("SC-INC", k, {.n0 = 12, .macro_reps = 300, .seed = 5});
    const auto summary = run_macro_experiment(sc, p, &schedule, {.threads = 2});
    const auto cfg = make_procedure_config(sc, p, &schedule);
    std::vector<double> per_k;
    long long correct = 0;
    for (long long r = 0; r < sc.macro_reps; ++r) {
      samplers::GaussianSampler sampler(sc.means, sc.variances,
                                        rng::derive_seed(sc.seed, static_cast<std::uint64_t>(r)));
      const auto out = procedures::run_procedure(p, cfg, sampler);
      per_k.push_back(static_cast<double>(out.total_observations) / k);
      if (out.selected == sc.best) ++correct;
    }
    const double n = static_cast<double>(per_k.size());
    const double mean = std::accumulate(per_k.begin(), per_k.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : per_k) ss += (v - mean) * (v - mean);
    INFO(procedures::to_string(p));
    CHECK(summary.correct == correct);
    CHECK(summary.rep_per_k == Approx(mean).epsilon(1e-12));
    CHECK(summary.rep_per_k_se == Approx(std::sqrt(ss / (n - 1) / n)).epsilon(1e-9));
    CHECK(summary.pcs_se == Approx(std::sqrt(summary.pcs * (1 - summary.pcs) / n)).epsilon(1e-12));
    CHECK(summary.rep_per_k >= static_cast<double>(sc.n0));
  }
}

TEST_CASE("noiseless profiles have no incorrect selections", "[statistics]") {
  const auto sc = make_scenario("SC-Equal", 8, {.macro_reps = 50, .variances = std::vector<double>(8, 1e-8)});
  const auto p = level_error_profile(sc, false, quick_settings());
  CHECK(p.ics_counts == std::vector<long long>(7, 0));
  for (double f : p.frequencies) CHECK(f == 0.0);
}

TEST_CASE("adjusted schedule spreads incorrect selections evenly over levels", "[statistics]") {
  // The ratio-to-β₀ band holds at every level with the exact two-system rule.
  // The −ln(2β) rule makes the last level's error about 4β², far below β.
  const int k = 64;
  const auto sc = make_scenario("SC-Equal", k, {.delta = 0.3, .macro_reps = 100'000,
                                                .variances = std::vector<double>(k, 1.0)});
  eta::SolverSettings settings;
  settings.two_system_rule = eta::TwoSystemRule::ExactHitting;
  auto schedule = eta::build_schedule(k, 0.1, eta::default_fit(0.1), settings);
  const auto p = level_error_profile(sc, schedule);
  const double beta0 = 0.1 / (k - 1);
  for (std::size_t l = 0; l < p.frequencies.size(); ++l) {
    INFO("level " << l + 1 << " ratio " << p.frequencies[l] / beta0);
    CHECK(p.frequencies[l] / beta0 >= 0.3);
    CHECK(p.frequencies[l] / beta0 <= 3.0);
  }

  auto& last = schedule.entries.back();
  last.eta = eta::eta_two_closed_form(last.beta_target);
  const auto closed = level_error_profile(sc, schedule);
  CHECK(closed.frequencies.back() / beta0 < 0.3);
}

TEST_CASE("uniform targets follow the fitted level density", "[statistics]") {
  // g has A > 1, so errors thin out near w = 0 and peak at an interior level.
  const int k = 64;
  const auto sc = make_scenario("SC-Equal", k, {.delta = 0.3, .macro_reps = 20'000,
                                                .variances = std::vector<double>(k, 1.0)});
  const auto p = level_error_profile(sc, true, eta::SolverSettings{});
  std::vector<double> deciles;
  for (int d = 0; d < 10; ++d) deciles.push_back(decile_mass(p, d / 10.0, (d + 1) / 10.0));
  const double peak = *std::max_element(deciles.begin() + 1, deciles.end() - 1);
  INFO("first " << deciles[0] << ", median " << deciles[4] << ", peak " << peak << ", last "
                << deciles[9]);
  CHECK(peak > deciles[0]);
  CHECK(peak > deciles[9]);
  CHECK(deciles[0] < deciles[4]);
}

TEST_CASE("oracle approaches the exact evaluator as the step shrinks", "[statistics]") {
  eta::SolverSettings settings;
  rng::NormalStream stream(rng::derive_seed(3, 3));
  const double exact = eta::level1_prob_mc(3, 0.5, settings, stream).probability;
  double previous = INFINITY;
  for (double step : {1e-2, 1e-3, 1e-4}) {
    const auto o = bm_first_elimination_oracle(3, 0.5, 1.0, 1.0, step, 100'000, 17);
    const double gap = std::abs(o.probability - exact);
    INFO("step " << step << " oracle " << o.probability << " exact " << exact);
    CHECK(gap < previous);
    previous = gap;
  }
}

TEST_CASE("DK1 cost per system grows with k", "[statistics]") {
  double previous = 0.0, previous_se = 0.0;
  for (int k : {16, 64, 256}) {
    const auto schedule = eta::build_schedule(k, 0.1, eta::default_fit(0.1), quick_settings());
    const auto sc = make_scenario("SC-Equal", k, {.macro_reps = 300});
    const auto s = run_macro_experiment(sc, Procedure::DK1, &schedule);
    INFO("k = " << k << " rep/k " << s.rep_per_k << " se " << s.rep_per_k_se);
    CHECK(s.rep_per_k + 3.0 * std::hypot(s.rep_per_k_se, previous_se) >= previous);
    previous = s.rep_per_k;
    previous_se = s.rep_per_k_se;
  }
}
