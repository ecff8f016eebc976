#pragma once

// Quadratic-form screening statistics and the variance estimators that feed
// the elimination thresholds.
//
// For a surviving set I = {i_1, ..., i_s} with independent outputs of
// variances σ²_i, the statistic is S_I(x) = (Vx)ᵀ (VΓVᵀ)⁻¹ (Vx), where V
// forms the differences x_{i_j} − x_{i_s} and Γ = diag(σ²). The statistic is
// invariant to the order of I and to adding a constant to every entry.

#include <cstddef>
#include <span>
#include <vector>

namespace spheresel::screening {

// Ordered list of distinct system ids (0-based).
class SurvivorSet {
 public:
  SurvivorSet() = default;
  explicit SurvivorSet(std::vector<int> ids);

  // {0, 1, ..., k-1}
  static SurvivorSet all(int k);

  std::size_t size() const noexcept { return ids_.size(); }
  bool empty() const noexcept { return ids_.empty(); }
  bool contains(int id) const;
  const std::vector<int>& ids() const noexcept { return ids_; }
  auto begin() const noexcept { return ids_.begin(); }
  auto end() const noexcept { return ids_.end(); }
  int operator[](std::size_t i) const { return ids_[i]; }

  // Removes `id`; throws if absent or if it is the last survivor.
  void remove(int id);

 private:
  std::vector<int> ids_;
};

enum class VarianceKind { KnownEqual, PooledEstimate, PerSystemEstimate };

struct VarianceProfile {
  std::vector<double> variances;
  VarianceKind kind = VarianceKind::KnownEqual;

  // Throws DomainError unless every variance is finite and strictly positive.
  void validate() const;
};

// Smallest variance used as a divisor. Sample variances of exactly zero can
// only come from degenerate (e.g. replayed) data.
inline constexpr double kVarianceFloor = 1e-300;

// max(v, kVarianceFloor); sets *clamped when the floor was applied.
double clamp_variance(double v, bool* clamped = nullptr);

// δ²_s = δ² (s − 1) / s.
double delta_squared(double delta, long long s);

// (1/σ²) Σ_{i∈I} (x_i − x̄)².
double equal_variance_stat(std::span<const double> values, double sigma2);

// (Vx)ᵀ (VΓVᵀ)⁻¹ (Vx) with Γ = diag(variances), inverted in closed form via
// Sherman–Morrison: VΓVᵀ = D + σ²_s 𝟙𝟙ᵀ with D = diag(σ²_1..σ²_{s-1}).
double general_variance_stat(std::span<const double> values, std::span<const double> variances);

// Πx with Π = ΓVᵀ(VΓVᵀ)⁻¹V. The result differs from x by a multiple of 𝟙
// and satisfies Σ y_i / σ²_i = 0.
std::vector<double> project_pi(std::span<const double> values, std::span<const double> variances);

// (1/|I|) Σ σ̂²_i.
double pooled_variance(std::span<const double> sample_variances);

// Σ σ̂²_i / Σ n_i.
double lambda_hat_squared(std::span<const double> sample_variances,
                          std::span<const long long> counts);

// Streaming mean and unbiased sample variance (Welford's recurrence).
class RunningStats {
 public:
  void push(double x) noexcept {
    ++count_;
    const double delta = x - mean_;
    mean_ += delta / static_cast<double>(count_);
    m2_ += delta * (x - mean_);
  }

  long long count() const noexcept { return count_; }
  double mean() const;
  // Requires count() ≥ 2.
  double variance() const;

 private:
  long long count_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

struct MeanVariance {
  double mean;
  double variance;
};

// Batch form of RunningStats; requires at least two observations.
MeanVariance sample_mean_and_variance(std::span<const double> observations);

}  // namespace spheresel::screening
