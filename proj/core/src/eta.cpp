#include "spheresel/eta.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <mutex>
#include <string>
#include <thread>

#include "spheresel/error.hpp"
#include "spheresel/numerics.hpp"

namespace spheresel::eta {

namespace {

using numerics::extreme_value_centering;
using numerics::log_gamma;

// Two-sided 99% normal quantile.
constexpr double kSignTestZ = 2.5758293035489004;
// Φ arguments beyond this magnitude are treated as saturated.
constexpr double kPhiArgLimit = 40.0;

inline double phi(double x) { return 0.5 * std::erfc(-x * 0.70710678118654752440); }

void require_size(long long s, long long min_size, const char* who) {
  if (s < min_size) {
    throw DomainError(std::string(who) + ": surviving-set size must be >= " +
                      std::to_string(min_size) + ", got " + std::to_string(s));
  }
}

void require_eta(double eta, const char* who) {
  if (!(eta > 0.0) || !std::isfinite(eta)) {
    throw DomainError(std::string(who) + ": eta must be finite and > 0");
  }
}

// Clamped, η-independent argument of f at u ∈ (0, 1), given 1 − u separately
// so that nodes close to 1 keep full precision.
inline double clamped_argument(double u, double one_minus_u, double scale, double centering,
                               double root) {
  const double neg_log_u = (u < 0.5) ? -std::log(u) : -std::log1p(-one_minus_u);
  const double v = std::log(neg_log_u) / scale - centering;
  return std::clamp(v, -root, root);
}

Level1Approx combine_level1(long long s, double eta, double expectation) {
  const double sm1 = static_cast<double>(s - 1);
  const double root = std::sqrt(sm1);
  const double lower_arg = -root - eta / root;
  Level1Approx out;
  double lower = 0.0;
  if (std::abs(lower_arg) <= kPhiArgLimit) {
    lower = phi(lower_arg);
  } else {
    out.dropped_lower_term = true;
  }
  const double bracket = expectation - lower;
  if (!(bracket > 0.0)) {
    out.probability = 0.0;
    return out;
  }
  const double log_p =
      eta * eta / (2.0 * sm1) + std::log(bracket) - level1_denominator_log(s, eta);
  out.probability = std::exp(log_p);
  return out;
}

std::string format_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace

// ---------------------------------------------------------------------------

void BetaFit::validate() const {
  if (!(a_exponent > 0.0) || !(b_exponent > 0.0) || !std::isfinite(a_exponent) ||
      !std::isfinite(b_exponent)) {
    throw DomainError("BetaFit: exponents must be finite and > 0");
  }
}

BetaFit default_fit(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("default_fit: alpha must be in (0, 1)");
  return kFitAlpha05;
}

void SolverSettings::validate() const {
  if (mc_sample_count < 1 || integration_intervals < 2 || batch_size < 1 || max_batches < 1) {
    throw ConfigError("SolverSettings: sample counts must be >= 1 and intervals >= 2");
  }
  if (!(deterministic_tolerance > 0.0) || !(stochastic_stop_tolerance > 0.0)) {
    throw ConfigError("SolverSettings: tolerances must be > 0");
  }
  if (small_set_threshold < 2) {
    throw ConfigError("SolverSettings: small_set_threshold must be >= 2");
  }
}

std::string SolverSettings::canonical_string() const {
  std::string out;
  out += "mc_sample_count=" + std::to_string(mc_sample_count);
  out += ";integration_intervals=" + std::to_string(integration_intervals);
  out += ";deterministic_tolerance=" + format_double(deterministic_tolerance);
  out += ";stochastic_stop_tolerance=" + format_double(stochastic_stop_tolerance);
  out += ";small_set_threshold=" + std::to_string(small_set_threshold);
  out += ";batch_size=" + std::to_string(batch_size);
  out += ";max_batches=" + std::to_string(max_batches);
  out += ";rng_seed=" + std::to_string(rng_seed);
  out += ";gumbel=";
  out += (gumbel_expectation == GumbelExpectation::Trapezoid) ? "trapezoid" : "monte-carlo";
  out += ";eta2=";
  out += (two_system_rule == TwoSystemRule::NegLogTwoBeta) ? "neg-log-two-beta" : "exact-hitting";
  return out;
}

std::uint64_t SolverSettings::hash() const {
  // FNV-1a
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : canonical_string()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string_view to_string(SolverKind kind) {
  switch (kind) {
    case SolverKind::DeterministicIntegration:
      return "deterministic-integration";
    case SolverKind::MonteCarlo:
      return "monte-carlo";
    case SolverKind::ClosedFormEta2:
      return "closed-form-eta2";
  }
  return "unknown";
}

SolverKind solver_kind_from_string(std::string_view text) {
  if (text == "deterministic-integration") return SolverKind::DeterministicIntegration;
  if (text == "monte-carlo") return SolverKind::MonteCarlo;
  if (text == "closed-form-eta2") return SolverKind::ClosedFormEta2;
  throw ConfigError("unknown solver tag '" + std::string(text) + "'");
}

const ScheduleEntry& EtaSchedule::entry(long long s) const {
  if (s < 2 || s > k) {
    throw DomainError("EtaSchedule: size " + std::to_string(s) + " outside [2, " +
                      std::to_string(k) + "]");
  }
  const auto& e = entries.at(static_cast<std::size_t>(k - s));
  if (e.size != s) throw DomainError("EtaSchedule: entries out of order");
  return e;
}

void EtaSchedule::validate() const {
  if (k < 2) throw ConfigError("EtaSchedule: k must be >= 2");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("EtaSchedule: alpha must be in (0, 1)");
  if (entries.size() != static_cast<std::size_t>(k - 1)) {
    throw ConfigError("EtaSchedule: expected " + std::to_string(k - 1) + " entries, got " +
                      std::to_string(entries.size()));
  }
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    if (e.size != k - static_cast<long long>(i)) {
      throw ConfigError("EtaSchedule: entries must be ordered by descending size");
    }
    if (!(e.eta > 0.0) || !std::isfinite(e.eta)) {
      throw ConfigError("EtaSchedule: eta must be > 0 at size " + std::to_string(e.size));
    }
    if (!(e.beta_target > 0.0 && e.beta_target < 1.0)) {
      throw ConfigError("EtaSchedule: beta target must be in (0, 1) at size " +
                        std::to_string(e.size));
    }
  }
}

// ---------------------------------------------------------------------------

double level1_denominator_log(long long s, double eta) {
  require_size(s, 2, "level1_denominator_log");
  require_eta(eta, "level1_denominator_log");
  const double nu = 0.5 * static_cast<double>(s - 3);
  return -nu * std::log(0.5 * eta) + log_gamma(nu + 1.0) + numerics::log_bessel_i(nu, eta);
}

Level1MonteCarlo::Level1MonteCarlo(long long s, double eta)
    : s_(s), eta_(eta), log_denominator_(0.0), draw_(static_cast<std::size_t>(s)) {
  require_size(s, 2, "level1_prob_mc");
  require_eta(eta, "level1_prob_mc");
  log_denominator_ = level1_denominator_log(s, eta);
}

void Level1MonteCarlo::add_samples(long long samples, rng::NormalStream& stream) {
  const double sd = static_cast<double>(s_);
  const double log_inv_s = -std::log(sd);
  for (long long r = 0; r < samples; ++r) {
    double total = 0.0;
    double smallest = std::numeric_limits<double>::infinity();
    for (auto& z : draw_) {
      z = stream.next();
      total += z;
      smallest = std::min(smallest, z);
    }
    const double mean = total / sd;
    double ss = 0.0;
    for (double z : draw_) ss += (z - mean) * (z - mean);
    // (s−1) Var_s(Z) with the population variance Var_s = ss / s.
    const double scale = std::sqrt((sd - 1.0) * ss / sd);
    const double w = (smallest - mean) / scale;
    const double y = std::exp(eta_ * w - log_denominator_ + log_inv_s);
    ++n_;
    const double delta = y - sum_;
    sum_ += delta / static_cast<double>(n_);
    sum_sq_ += delta * (y - sum_);
  }
}

McEstimate Level1MonteCarlo::estimate() const {
  McEstimate out;
  out.samples = n_;
  out.probability = sum_;
  if (n_ > 1) {
    out.standard_error = std::sqrt(sum_sq_ / static_cast<double>(n_ - 1) / static_cast<double>(n_));
  }
  return out;
}

McEstimate level1_prob_mc(long long s, double eta, const SolverSettings& settings,
                          rng::NormalStream& stream) {
  Level1MonteCarlo mc(s, eta);
  mc.add_samples(settings.mc_sample_count, stream);
  return mc.estimate();
}

double integrand_f(double u, long long s, double eta) {
  require_size(s, 3, "integrand_f");
  if (!(u >= 0.0 && u <= 1.0)) throw DomainError("integrand_f: u must lie in [0, 1]");
  const double root = std::sqrt(static_cast<double>(s - 1));
  const double shift = eta / root;
  if (u == 0.0) return phi(root - shift);
  if (u == 1.0) return phi(-root - shift);
  const double scale = std::sqrt(2.0 * std::log(static_cast<double>(s)));
  const double v = std::log(-std::log(u)) / scale - extreme_value_centering(s - 1);
  return phi(std::clamp(v, -root, root) - shift);
}

double integrate_f(long long s, double eta, long long intervals) {
  if (intervals < 2) throw DomainError("integrate_f: need at least two intervals");
  require_size(s, 3, "integrate_f");
  // Hoist the s-dependent constants; the per-node expression matches integrand_f.
  const double root = std::sqrt(static_cast<double>(s - 1));
  const double shift = eta / root;
  const double scale = std::sqrt(2.0 * std::log(static_cast<double>(s)));
  const double centering = extreme_value_centering(s - 1);
  return trapezoid_unit_interval(
      [&](double u) {
        if (u == 0.0) return phi(root - shift);
        if (u == 1.0) return phi(-root - shift);
        const double v = std::log(-std::log(u)) / scale - centering;
        return phi(std::clamp(v, -root, root) - shift);
      },
      intervals);
}

ApproxLevel1Evaluator::ApproxLevel1Evaluator(long long s, long long intervals)
    : s_(s), intervals_(intervals), root_(0.0) {
  require_size(s, 3, "ApproxLevel1Evaluator");
  if (intervals < 2) throw DomainError("ApproxLevel1Evaluator: need at least two intervals");
  root_ = std::sqrt(static_cast<double>(s - 1));
  const double scale = std::sqrt(2.0 * std::log(static_cast<double>(s)));
  const double centering = extreme_value_centering(s - 1);
  const double n = static_cast<double>(intervals);
  clamped_.resize(static_cast<std::size_t>(intervals + 1));
  clamped_.front() = root_;
  clamped_.back() = -root_;
  for (long long j = 1; j < intervals; ++j) {
    clamped_[static_cast<std::size_t>(j)] = clamped_argument(
        static_cast<double>(j) / n, static_cast<double>(intervals - j) / n, scale, centering, root_);
  }
}

double ApproxLevel1Evaluator::expectation(double eta) const {
  const double shift = eta / root_;
  double sum = 0.5 * (phi(clamped_.front() - shift) + phi(clamped_.back() - shift));
  for (std::size_t j = 1; j + 1 < clamped_.size(); ++j) sum += phi(clamped_[j] - shift);
  return sum / static_cast<double>(intervals_);
}

Level1Approx ApproxLevel1Evaluator::probability(double eta) const {
  require_eta(eta, "ApproxLevel1Evaluator::probability");
  return combine_level1(s_, eta, expectation(eta));
}

Level1Approx level1_prob_approx_detail(long long s, double eta, const SolverSettings& settings) {
  require_size(s, 3, "level1_prob_approx");
  require_eta(eta, "level1_prob_approx");
  double expectation = 0.0;
  if (settings.gumbel_expectation == GumbelExpectation::Trapezoid) {
    expectation = integrate_f(s, eta, settings.integration_intervals);
  } else {
    rng::NormalStream stream(rng::derive_seed(settings.rng_seed, static_cast<std::uint64_t>(s)));
    double sum = 0.0;
    for (long long i = 0; i < settings.mc_sample_count; ++i) {
      sum += integrand_f(stream.next_uniform(), s, eta);
    }
    expectation = sum / static_cast<double>(settings.mc_sample_count);
  }
  return combine_level1(s, eta, expectation);
}

double level1_prob_approx(long long s, double eta, const SolverSettings& settings) {
  return level1_prob_approx_detail(s, eta, settings).probability;
}

double remark_numerator_approx(long long s, double eta) {
  require_size(s, 3, "remark_numerator_approx");
  if (!(eta >= 0.0)) throw DomainError("remark_numerator_approx: eta must be >= 0");
  const double sd = static_cast<double>(s);
  const double log_value = -std::log(sd) -
                           eta * extreme_value_centering(s) / std::sqrt(sd - 1.0) +
                           log_gamma(1.0 + eta / std::sqrt(2.0 * (sd - 1.0) * std::log(sd)));
  return std::exp(log_value);
}

// ---------------------------------------------------------------------------

std::vector<double> level_weights(long long k, const BetaFit& fit) {
  if (k < 2) throw DomainError("level_weights: k must be >= 2");
  fit.validate();
  const double levels = static_cast<double>(k - 1);
  std::vector<double> cdf(static_cast<std::size_t>(k));
  cdf[0] = 0.0;
  for (long long l = 1; l < k; ++l) {
    cdf[static_cast<std::size_t>(l)] = numerics::regularized_incomplete_beta(
        fit.a_exponent, fit.b_exponent, static_cast<double>(l) / levels);
  }
  const double first = cdf[1];
  std::vector<double> m(static_cast<std::size_t>(k - 1));
  for (std::size_t l = 0; l < m.size(); ++l) m[l] = (cdf[l + 1] - cdf[l]) / first;
  return m;
}

BetaTargets beta_targets(long long k, double alpha, const BetaFit& fit) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("beta_targets: alpha must be in (0, 1)");
  const auto m = level_weights(k, fit);
  const double beta0 = alpha / static_cast<double>(k - 1);
  BetaTargets out;
  out.beta.resize(m.size());
  out.flagged.resize(m.size());
  for (std::size_t l = 0; l < m.size(); ++l) {
    const double b = beta0 / m[l];
    if (!(b > 0.0 && b < 1.0)) {
      throw DomainError("beta_targets: level " + std::to_string(l + 1) + " target " +
                        std::to_string(b) + " is not a probability");
    }
    out.beta[l] = b;
    out.flagged[l] = b >= 0.5;
  }
  return out;
}

double eta_two_closed_form(double beta) {
  if (!(beta > 0.0 && beta < 0.5)) {
    throw DomainError("eta_two_closed_form: beta must lie in (0, 0.5), got " +
                      std::to_string(beta));
  }
  return -std::log(2.0 * beta);
}

double eta_two_exact_hitting(double beta) {
  if (!(beta > 0.0 && beta < 0.5)) {
    throw DomainError("eta_two_exact_hitting: beta must lie in (0, 0.5), got " +
                      std::to_string(beta));
  }
  return 0.5 * std::log((1.0 - beta) / beta);
}

// ---------------------------------------------------------------------------

double solve_eta_deterministic(long long s, double beta_target, const SolverSettings& settings) {
  require_size(s, 3, "solve_eta_deterministic");
  settings.validate();
  if (!(beta_target > 0.0 && beta_target < 1.0)) {
    throw DomainError("solve_eta_deterministic: beta target must be in (0, 1)");
  }
  const ApproxLevel1Evaluator full(s, settings.integration_intervals);
  auto above = [&](const ApproxLevel1Evaluator& ev, double eta) {
    const double p = ev.probability(eta).probability;
    if (!std::isfinite(p)) {
      throw SolverError("level-1 approximation is not finite at eta=" + std::to_string(eta), eta);
    }
    return p > beta_target;
  };

  double lo = 0.1;
  double hi = 2.0;
  if (!above(full, lo)) {
    throw SolverError("target " + std::to_string(beta_target) +
                          " exceeds the level-1 probability at eta=0.1",
                      lo);
  }
  for (int doublings = 0; above(full, hi); ++doublings) {
    if (doublings >= 60) throw SolverError("could not bracket eta after 60 doublings", hi);
    lo = hi;
    hi *= 2.0;
  }

  // Narrow the bracket on a 100x coarser grid, then confirm it on the full
  // grid before the final bisection. The confirmed bracket always straddles
  // the full-grid root.
  if (settings.integration_intervals >= 200'000) {
    const ApproxLevel1Evaluator coarse(s, settings.integration_intervals / 100);
    double clo = lo;
    double chi = hi;
    while (chi - clo > 1e-5) {
      const double mid = 0.5 * (clo + chi);
      (above(coarse, mid) ? clo : chi) = mid;
    }
    const double centre = 0.5 * (clo + chi);
    for (double half_width = 1e-3; half_width < hi - lo; half_width *= 8.0) {
      const double a = std::max(lo, centre - half_width);
      const double b = std::min(hi, centre + half_width);
      if (above(full, a) && !above(full, b)) {
        lo = a;
        hi = b;
        break;
      }
    }
  }

  while (hi - lo > settings.deterministic_tolerance) {
    const double mid = 0.5 * (lo + hi);
    (above(full, mid) ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

StochasticSolve solve_eta_stochastic(long long s, double beta_target,
                                     const SolverSettings& settings, std::uint64_t stream_key) {
  require_size(s, 2, "solve_eta_stochastic");
  settings.validate();
  if (!(beta_target > 0.0 && beta_target < 1.0 / static_cast<double>(s))) {
    throw SolverError("beta target must lie in (0, 1/s) for a positive root", 0.0);
  }
  rng::NormalStream stream(stream_key);
  StochasticSolve out;

  // +1 when the level-1 probability at eta is above the target (root lies to the right).
  auto sign_test = [&](double eta) {
    Level1MonteCarlo mc(s, eta);
    McEstimate est;
    for (int batch = 0; batch < settings.max_batches; ++batch) {
      mc.add_samples(settings.batch_size, stream);
      est = mc.estimate();
      if (std::abs(est.probability - beta_target) > kSignTestZ * est.standard_error) break;
    }
    out.samples_used += est.samples;
    return est.probability > beta_target ? 1 : -1;
  };

  double lo = 0.0;
  double hi = 2.0;
  for (int doublings = 0; sign_test(hi) > 0; ++doublings) {
    if (doublings >= 60) throw SolverError("could not bracket eta after 60 doublings", hi);
    lo = hi;
    hi *= 2.0;
  }

  constexpr int kMaxIterations = 200;
  double previous = 0.5 * (lo + hi);
  while (hi - lo >= settings.stochastic_stop_tolerance) {
    if (out.iterations >= kMaxIterations) {
      throw SolverError("stochastic bisection exhausted its iteration budget", 0.5 * (lo + hi));
    }
    const double mid = 0.5 * (lo + hi);
    (sign_test(mid) > 0 ? lo : hi) = mid;
    ++out.iterations;
    const double current = 0.5 * (lo + hi);
    out.last_move = std::abs(current - previous);
    previous = current;
  }
  out.eta = 0.5 * (lo + hi);
  return out;
}

StochasticSolve solve_eta_stochastic(long long s, double beta_target,
                                     const SolverSettings& settings) {
  return solve_eta_stochastic(s, beta_target, settings,
                              rng::derive_seed(settings.rng_seed, static_cast<std::uint64_t>(s)));
}

// ---------------------------------------------------------------------------

EtaSchedule build_schedule(long long k, double alpha, const BetaFit& fit,
                           const SolverSettings& settings, unsigned threads,
                           const ScheduleProgress& progress) {
  if (k < 2) throw DomainError("build_schedule: k must be >= 2");
  settings.validate();
  const BetaTargets targets = beta_targets(k, alpha, fit);

  EtaSchedule schedule;
  schedule.k = k;
  schedule.alpha = alpha;
  schedule.entries.resize(static_cast<std::size_t>(k - 1));
  for (std::size_t l = 0; l < targets.flagged.size(); ++l) {
    if (targets.flagged[l]) {
      schedule.warnings.push_back("level " + std::to_string(l + 1) + ": beta target " +
                                  std::to_string(targets.beta[l]) +
                                  " >= 0.5 (eta_2 closed form is not positive)");
    }
  }

  auto solve_level = [&](long long level) {
    const long long s = k - level + 1;
    const double beta = targets.beta[static_cast<std::size_t>(level - 1)];
    ScheduleEntry e;
    e.size = s;
    e.beta_target = beta;
    if (s == 2) {
      e.solver = SolverKind::ClosedFormEta2;
      e.eta = settings.two_system_rule == TwoSystemRule::NegLogTwoBeta
                  ? eta_two_closed_form(beta)
                  : eta_two_exact_hitting(beta);
    } else if (s >= settings.small_set_threshold) {
      e.solver = SolverKind::DeterministicIntegration;
      e.eta = solve_eta_deterministic(s, beta, settings);
    } else {
      e.solver = SolverKind::MonteCarlo;
      e.eta = solve_eta_stochastic(s, beta, settings,
                                   rng::derive_seed(settings.rng_seed,
                                                    static_cast<std::uint64_t>(level)))
                  .eta;
    }
    schedule.entries[static_cast<std::size_t>(level - 1)] = e;
  };

  const long long levels = k - 1;
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(levels));
  std::atomic<long long> next{1};
  std::mutex progress_mutex;
  auto worker = [&] {
    for (long long level = next++; level <= levels; level = next++) {
      try {
        solve_level(level);
        if (progress) {
          std::lock_guard lock(progress_mutex);
          const auto& e = schedule.entries[static_cast<std::size_t>(level - 1)];
          progress(level, e.size, e.eta);
        }
      } catch (...) {
        errors[static_cast<std::size_t>(level - 1)] = std::current_exception();
      }
    }
  };

  const unsigned n_threads =
      std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(levels)));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  for (long long level = 1; level <= levels; ++level) {
    const auto& err = errors[static_cast<std::size_t>(level - 1)];
    if (!err) continue;
    const std::string where =
        "level " + std::to_string(level) + " (s=" + std::to_string(k - level + 1) + "): ";
    try {
      std::rethrow_exception(err);
    } catch (const SolverError& e) {
      throw SolverError(where + e.what(), e.best_iterate(), static_cast<int>(level));
    } catch (const DomainError& e) {
      throw SolverError(where + e.what(), 0.0, static_cast<int>(level));
    }
  }
  return schedule;
}

}  // namespace spheresel::eta
