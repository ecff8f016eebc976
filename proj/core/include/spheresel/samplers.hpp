#pragma once

// Observation sources for the selection procedures. Systems are sampled
// independently; each system owns its own stream.

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "spheresel/rng.hpp"

namespace spheresel::samplers {

class Sampler {
 public:
  virtual ~Sampler() = default;

  virtual int systems() const = 0;
  // Next observation of `system` (0-based).
  virtual double draw_one(int system) = 0;

  void draw(int system, std::span<double> out) {
    for (double& x : out) x = draw_one(system);
  }
  std::vector<double> draw(int system, long long count) {
    std::vector<double> out(static_cast<std::size_t>(count));
    draw(system, std::span<double>(out));
    return out;
  }
};

// X_ij = μ_i + σ_i Z_ij with Z_ij the j-th normal of the stream keyed by
// derive_seed(seed, i).
class GaussianSampler final : public Sampler {
 public:
  GaussianSampler(std::vector<double> means, std::vector<double> variances, std::uint64_t seed);

  int systems() const override { return static_cast<int>(means_.size()); }
  double draw_one(int system) override;

 private:
  std::vector<double> means_;
  std::vector<double> sds_;
  std::vector<rng::NormalStream> streams_;
};

// a + c·X for every observation of the wrapped sampler.
class AffineSampler final : public Sampler {
 public:
  AffineSampler(Sampler& inner, double scale, double shift = 0.0)
      : inner_(inner), scale_(scale), shift_(shift) {}

  int systems() const override { return inner_.systems(); }
  double draw_one(int system) override { return shift_ + scale_ * inner_.draw_one(system); }

 private:
  Sampler& inner_;
  double scale_;
  double shift_;
};

// System i of this sampler is system perm[i] of the wrapped one.
class PermutedSampler final : public Sampler {
 public:
  PermutedSampler(Sampler& inner, std::vector<int> perm);

  int systems() const override { return static_cast<int>(perm_.size()); }
  double draw_one(int system) override;

 private:
  Sampler& inner_;
  std::vector<int> perm_;
};

// One recorded observation; ids and indices are 0-based in memory and
// 1-based in files.
struct Observation {
  int system = 0;
  long long index = 0;
  double value = 0.0;
};

// Forwards to a live sampler and keeps every observation handed out.
class RecordingSampler final : public Sampler {
 public:
  explicit RecordingSampler(Sampler& inner);

  int systems() const override { return inner_.systems(); }
  double draw_one(int system) override;

  const std::vector<Observation>& observations() const noexcept { return log_; }
  // CSV `system_id,index,value`, values with 17 significant digits.
  void write_csv(std::ostream& out, const std::string& comment = {}) const;
  void write_file(const std::string& path, const std::string& comment = {}) const;

 private:
  Sampler& inner_;
  std::vector<long long> next_index_;
  std::vector<Observation> log_;
};

// Serves pre-recorded observations in index order per system. Running past
// the end of a system's record throws std::out_of_range.
class ReplaySampler final : public Sampler {
 public:
  ReplaySampler(int systems, const std::vector<Observation>& observations);

  static ReplaySampler from_csv(std::istream& in, int systems);
  static ReplaySampler from_file(const std::string& path, int systems);

  int systems() const override { return static_cast<int>(values_.size()); }
  double draw_one(int system) override;

 private:
  std::vector<std::vector<double>> values_;
  std::vector<std::size_t> cursor_;
};

}  // namespace spheresel::samplers
