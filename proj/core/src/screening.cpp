#include "spheresel/screening.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "spheresel/error.hpp"

namespace spheresel::screening {

namespace {

void require_matching(std::span<const double> values, std::span<const double> variances,
                      const char* who) {
  if (values.size() < 2) {
    throw DomainError(std::string(who) + ": need at least two systems");
  }
  if (values.size() != variances.size()) {
    throw DomainError(std::string(who) + ": values and variances differ in length");
  }
  for (double v : variances) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw DomainError(std::string(who) + ": variances must be finite and > 0");
    }
  }
}

// Sherman–Morrison pieces shared by the statistic and the projection. With
// d_i = x_i − x_s and w_i = 1/σ²_i for i < s:
//   (VΓVᵀ)⁻¹ d = W d − σ²_s W𝟙 (𝟙ᵀW d) / (1 + σ²_s 𝟙ᵀW𝟙).
struct ShermanMorrison {
  double weighted_sq = 0.0;   // Σ w_i d_i²
  double weighted_sum = 0.0;  // Σ w_i d_i
  double weight_total = 0.0;  // Σ w_i
  double last_variance = 0.0;

  double correction() const {
    return last_variance * weighted_sum / (1.0 + last_variance * weight_total);
  }
};

ShermanMorrison sherman_morrison(std::span<const double> x, std::span<const double> var) {
  ShermanMorrison sm;
  const std::size_t s = x.size();
  const double last = x[s - 1];
  sm.last_variance = var[s - 1];
  for (std::size_t i = 0; i + 1 < s; ++i) {
    const double w = 1.0 / var[i];
    const double d = x[i] - last;
    sm.weighted_sq += w * d * d;
    sm.weighted_sum += w * d;
    sm.weight_total += w;
  }
  return sm;
}

}  // namespace

SurvivorSet::SurvivorSet(std::vector<int> ids) : ids_(std::move(ids)) {
  if (ids_.empty()) throw DomainError("SurvivorSet: must be nonempty");
  std::vector<int> sorted = ids_;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw DomainError("SurvivorSet: duplicate system id");
  }
}

SurvivorSet SurvivorSet::all(int k) {
  if (k < 1) throw DomainError("SurvivorSet::all: k must be >= 1");
  std::vector<int> ids(static_cast<std::size_t>(k));
  std::iota(ids.begin(), ids.end(), 0);
  return SurvivorSet(std::move(ids));
}

bool SurvivorSet::contains(int id) const {
  return std::find(ids_.begin(), ids_.end(), id) != ids_.end();
}

void SurvivorSet::remove(int id) {
  auto it = std::find(ids_.begin(), ids_.end(), id);
  if (it == ids_.end()) throw DomainError("SurvivorSet::remove: id not present");
  if (ids_.size() == 1) throw DomainError("SurvivorSet::remove: cannot remove last survivor");
  ids_.erase(it);
}

void VarianceProfile::validate() const {
  if (variances.empty()) throw DomainError("VarianceProfile: empty");
  for (double v : variances) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw DomainError("VarianceProfile: variances must be finite and > 0");
    }
  }
}

double clamp_variance(double v, bool* clamped) {
  if (v < kVarianceFloor) {
    if (clamped) *clamped = true;
    return kVarianceFloor;
  }
  return v;
}

double delta_squared(double delta, long long s) {
  if (!(delta > 0.0)) throw DomainError("delta_squared: delta must be > 0");
  if (s < 2) throw DomainError("delta_squared: set size must be >= 2");
  const double sd = static_cast<double>(s);
  return delta * delta * (sd - 1.0) / sd;
}

double equal_variance_stat(std::span<const double> values, double sigma2) {
  if (values.size() < 2) throw DomainError("equal_variance_stat: need at least two systems");
  if (!(sigma2 > 0.0)) throw DomainError("equal_variance_stat: sigma2 must be > 0");
  const double mean =
      std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  double ss = 0.0;
  for (double x : values) ss += (x - mean) * (x - mean);
  return ss / sigma2;
}

double general_variance_stat(std::span<const double> values, std::span<const double> variances) {
  require_matching(values, variances, "general_variance_stat");
  const ShermanMorrison sm = sherman_morrison(values, variances);
  const double stat = sm.weighted_sq - sm.weighted_sum * sm.correction();
  return std::max(stat, 0.0);
}

std::vector<double> project_pi(std::span<const double> values, std::span<const double> variances) {
  require_matching(values, variances, "project_pi");
  const std::size_t s = values.size();
  const ShermanMorrison sm = sherman_morrison(values, variances);
  const double correction = sm.correction();
  const double last = values[s - 1];

  // u = (VΓVᵀ)⁻¹ V x, then Πx = Γ Vᵀ u.
  std::vector<double> out(s);
  double u_total = 0.0;
  for (std::size_t i = 0; i + 1 < s; ++i) {
    const double w = 1.0 / variances[i];
    const double u = w * (values[i] - last) - w * correction;
    out[i] = variances[i] * u;
    u_total += u;
  }
  out[s - 1] = -variances[s - 1] * u_total;
  return out;
}

double pooled_variance(std::span<const double> sample_variances) {
  if (sample_variances.empty()) throw DomainError("pooled_variance: empty input");
  return std::accumulate(sample_variances.begin(), sample_variances.end(), 0.0) /
         static_cast<double>(sample_variances.size());
}

double lambda_hat_squared(std::span<const double> sample_variances,
                          std::span<const long long> counts) {
  if (sample_variances.empty()) throw DomainError("lambda_hat_squared: empty input");
  if (sample_variances.size() != counts.size()) {
    throw DomainError("lambda_hat_squared: variances and counts differ in length");
  }
  double var_total = 0.0;
  long long count_total = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (counts[i] < 1) throw DomainError("lambda_hat_squared: counts must be >= 1");
    var_total += sample_variances[i];
    count_total += counts[i];
  }
  return var_total / static_cast<double>(count_total);
}

double RunningStats::mean() const {
  if (count_ < 1) throw DomainError("RunningStats::mean: no observations");
  return mean_;
}

double RunningStats::variance() const {
  if (count_ < 2) throw DomainError("RunningStats::variance: need at least two observations");
  return m2_ / static_cast<double>(count_ - 1);
}

MeanVariance sample_mean_and_variance(std::span<const double> observations) {
  if (observations.size() < 2) {
    throw DomainError("sample_mean_and_variance: need at least two observations");
  }
  RunningStats stats;
  for (double x : observations) stats.push(x);
  return {stats.mean(), stats.variance()};
}

}  // namespace spheresel::screening
