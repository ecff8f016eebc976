#pragma once

// Elimination-threshold schedule η_s for s = k, ..., 2.
//
// Sampling in the continuation region is modelled as Brownian motion on the
// hyperplane Σx_i = 0. With radius r = ση_s/δ_s, the chance that the best of
// s survivors is the first one eliminated has an exact von Mises form (a
// Monte Carlo ratio with a Bessel normalizer) and an asymptotic form built
// from the Gumbel limit of the minimum of normals. η_s is the root of
// "probability = β_ℓ" where the per-level targets β_ℓ are spread according
// to a beta-density model of where incorrect selections occur.

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "spheresel/rng.hpp"

namespace spheresel::eta {

// Beta-density model g(w) ∝ w^{A-1} (1-w)^{B-1} for the standardized level
// w = ℓ/k at which incorrect selections occur under an unadjusted schedule.
struct BetaFit {
  double a_exponent = 1.0;
  double b_exponent = 1.0;
  double alpha_of_fit = 0.0;  // α the fit was made at; 0 for synthetic fits

  void validate() const;
  friend bool operator==(const BetaFit&, const BetaFit&) = default;
};

inline constexpr BetaFit kFitAlpha10{1.19805, 1.30662, 0.10};
inline constexpr BetaFit kFitAlpha05{1.2317, 1.39658, 0.05};
// A = B = 1 gives m_ℓ = 1 for every level, i.e. β_ℓ = α/(k-1) throughout.
inline constexpr BetaFit kUniformFit{1.0, 1.0, 0.0};

// The α = 5% fit. It reproduces the reference α = 10% threshold table, so it
// is used for every α unless a fit is chosen explicitly.
BetaFit default_fit(double alpha);

enum class GumbelExpectation { Trapezoid, MonteCarlo };

// How η₂ is set from β when only two systems survive.
//   NegLogTwoBeta: η₂ = −ln(2β)
//   ExactHitting:  η₂ = ½ ln((1−β)/β), the exact two-system hitting rule
enum class TwoSystemRule { NegLogTwoBeta, ExactHitting };

struct SolverSettings {
  long long mc_sample_count = 1'000'000;
  long long integration_intervals = 1'000'000;
  double deterministic_tolerance = 1e-6;
  double stochastic_stop_tolerance = 1e-3;
  long long small_set_threshold = 10;
  long long batch_size = 50'000;
  int max_batches = 20;
  std::uint64_t rng_seed = 20'150'611;
  GumbelExpectation gumbel_expectation = GumbelExpectation::Trapezoid;
  TwoSystemRule two_system_rule = TwoSystemRule::NegLogTwoBeta;

  void validate() const;
  // Stable textual form of every field; schedules are cached under its hash.
  std::string canonical_string() const;
  std::uint64_t hash() const;
};

enum class SolverKind { DeterministicIntegration, MonteCarlo, ClosedFormEta2 };

std::string_view to_string(SolverKind kind);
SolverKind solver_kind_from_string(std::string_view text);

struct ScheduleEntry {
  long long size = 0;  // surviving-set size s
  double eta = 0.0;
  double beta_target = 0.0;
  SolverKind solver = SolverKind::DeterministicIntegration;

  friend bool operator==(const ScheduleEntry&, const ScheduleEntry&) = default;
};

// η_s for s = k, k-1, ..., 2 (entries stored in that order).
struct EtaSchedule {
  long long k = 0;
  double alpha = 0.0;
  std::vector<ScheduleEntry> entries;
  std::vector<std::string> warnings;

  const ScheduleEntry& entry(long long s) const;
  double eta(long long s) const { return entry(s).eta; }
  void validate() const;
};

// ---------------------------------------------------------------------------
// Level-1 probability evaluators

// ln[(η/2)^{-ν} Γ(ν+1) I_ν(η)], ν = (s−3)/2. Tends to 0 as η → 0.
double level1_denominator_log(long long s, double eta);

struct McEstimate {
  double probability = 0.0;
  double standard_error = 0.0;
  long long samples = 0;
};

// Running sums for the Monte Carlo level-1 estimator, so batches can be added
// until a decision is reached.
class Level1MonteCarlo {
 public:
  Level1MonteCarlo(long long s, double eta);

  // Draws `samples` vectors of s standard normals from `stream`.
  void add_samples(long long samples, rng::NormalStream& stream);
  McEstimate estimate() const;

 private:
  long long s_;
  double eta_;
  double log_denominator_;
  long long n_ = 0;
  double sum_ = 0.0;
  double sum_sq_ = 0.0;
  std::vector<double> draw_;
};

// (1/s) E[exp(η (min Z − Ē(Z)) / √((s−1) Var(Z)))] / denominator, the exact
// symmetrized ratio, estimated with settings.mc_sample_count draws. s = 2 is
// accepted and reduces to 1/(1 + e^{2η}).
McEstimate level1_prob_mc(long long s, double eta, const SolverSettings& settings,
                          rng::NormalStream& stream);

struct Level1Approx {
  double probability = 0.0;
  // Set when the lower Φ term underflowed (|argument| > 40) and was dropped.
  bool dropped_lower_term = false;
};

// Asymptotic level-1 probability with |I| = s, with the Gumbel expectation
// taken by the trapezoid rule over U ∈ [0, 1] (or by Monte Carlo when
// settings.gumbel_expectation says so).
double level1_prob_approx(long long s, double eta, const SolverSettings& settings);
Level1Approx level1_prob_approx_detail(long long s, double eta, const SolverSettings& settings);

// f(u) = Φ(clamp(ln(−ln u)/√(2 ln s) − c_{s−1}) − η/√(s−1)), clamp to
// [−√(s−1), √(s−1)], with the clamped limits at u = 0 and u = 1.
double integrand_f(double u, long long s, double eta);

// (1/N) [½g(0) + Σ_{j=1}^{N-1} g(j/N) + ½g(1)]
template <class F>
double trapezoid_unit_interval(F&& g, long long intervals) {
  const double n = static_cast<double>(intervals);
  double sum = 0.5 * (g(0.0) + g(1.0));
  for (long long j = 1; j < intervals; ++j) sum += g(static_cast<double>(j) / n);
  return sum / n;
}

double integrate_f(long long s, double eta, long long intervals);

// Precomputes the η-independent part of f on the trapezoid grid so that
// repeated evaluations during root finding cost one Φ per node.
class ApproxLevel1Evaluator {
 public:
  ApproxLevel1Evaluator(long long s, long long intervals);

  double expectation(double eta) const;  // E f(U) by the trapezoid rule
  Level1Approx probability(double eta) const;
  long long size() const noexcept { return s_; }

 private:
  long long s_;
  long long intervals_;
  double root_;  // √(s−1)
  std::vector<double> clamped_;
};

// Remark-style closed form for the exact numerator:
// (1/s) e^{−η c_s/√(s−1)} Γ(1 + η/√(2(s−1) ln s)). Diagnostic only.
double remark_numerator_approx(long long s, double eta);

// ---------------------------------------------------------------------------
// Level targets

// m_ℓ = [G(ℓ/(k−1)) − G((ℓ−1)/(k−1))] / G(1/(k−1)), ℓ = 1..k−1.
std::vector<double> level_weights(long long k, const BetaFit& fit);

struct BetaTargets {
  std::vector<double> beta;     // β_ℓ, index ℓ−1
  std::vector<bool> flagged;    // β_ℓ ≥ 0.5
};

// β_ℓ = (α/(k−1)) / m_ℓ. Throws DomainError if any β_ℓ ≥ 1.
BetaTargets beta_targets(long long k, double alpha, const BetaFit& fit);

double eta_two_closed_form(double beta);
double eta_two_exact_hitting(double beta);

// ---------------------------------------------------------------------------
// Root solvers

// Bisection on the asymptotic evaluator (decreasing in η) to an η-interval of
// width ≤ settings.deterministic_tolerance. Bracket grows from [0.1, 2] by
// doubling the upper end.
double solve_eta_deterministic(long long s, double beta_target, const SolverSettings& settings);

struct StochasticSolve {
  double eta = 0.0;
  int iterations = 0;
  double last_move = 0.0;
  long long samples_used = 0;
};

// Bisection driven by a Monte Carlo sign test. At each midpoint, batches of
// settings.batch_size draws are added until the 99% normal interval excludes
// the target (or settings.max_batches is reached, in which case the point
// estimate decides). Stops once the interval is narrower than
// settings.stochastic_stop_tolerance.
StochasticSolve solve_eta_stochastic(long long s, double beta_target,
                                     const SolverSettings& settings, std::uint64_t stream_key);
StochasticSolve solve_eta_stochastic(long long s, double beta_target,
                                     const SolverSettings& settings);

// Optional per-level progress report: (level, size, eta).
using ScheduleProgress = std::function<void(long long, long long, double)>;

// Solves every level ℓ = 1..k−1 (s = k−ℓ+1): s ≥ small_set_threshold with the
// deterministic solver, 3 ≤ s below it with the stochastic solver (stream
// derived from (rng_seed, ℓ)), s = 2 in closed form. `threads` > 1 solves
// levels concurrently; the result does not depend on it.
EtaSchedule build_schedule(long long k, double alpha, const BetaFit& fit,
                           const SolverSettings& settings, unsigned threads = 1,
                           const ScheduleProgress& progress = {});

}  // namespace spheresel::eta
