#pragma once

// Counter-based random numbers. Every draw is a pure function of
// (key, counter), so per-(replication, system, index) streams are
// reproducible regardless of scheduling or thread count.

#include <array>
#include <cstdint>

namespace spheresel::rng {

using Philox4x32Counter = std::array<std::uint32_t, 4>;
using Philox4x32Key = std::array<std::uint32_t, 2>;

// Philox4x32 with 10 rounds (Salmon et al., SC'11).
Philox4x32Counter philox4x32_10(Philox4x32Counter counter, Philox4x32Key key);

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Derives a child seed from a parent seed and an index (replication id,
// system id, elimination level, ...).
constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t index) {
  return mix64(parent ^ mix64(index + 0x632BE59BD9B4E019ULL));
}

// Uniform double in the open interval (0, 1) from the top 52 of 64 random bits.
constexpr double to_open_unit(std::uint64_t bits) {
  return (static_cast<double>(bits >> 12) + 0.5) * 0x1.0p-52;
}

// Sequential view over a keyed Philox stream producing standard normals via
// Box-Muller. Draw i of a stream depends only on (key, i).
class NormalStream {
 public:
  NormalStream() = default;
  explicit NormalStream(std::uint64_t key) : key_(key) {}

  double next();
  double next_uniform();

  // Index of the next normal to be returned.
  std::uint64_t position() const noexcept { return position_; }
  std::uint64_t key() const noexcept { return key_; }

  // Random access: the i-th standard normal of the stream keyed by `key`.
  static double normal_at(std::uint64_t key, std::uint64_t index);

 private:
  std::uint64_t key_ = 0;
  std::uint64_t position_ = 0;
  std::uint64_t uniform_block_ = 0;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace spheresel::rng
