#include "spheresel/rng.hpp"

#include <cmath>
#include <numbers>

namespace spheresel::rng {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t product = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(product >> 32);
  lo = static_cast<std::uint32_t>(product);
}

inline Philox4x32Key split_key(std::uint64_t key) {
  return {static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32)};
}

// Two standard normals from block `block` of the stream.
inline void box_muller_pair(std::uint64_t key, std::uint64_t block, double& first,
                            double& second) {
  const auto out = philox4x32_10(
      {static_cast<std::uint32_t>(block), static_cast<std::uint32_t>(block >> 32), 0u, 0u},
      split_key(key));
  const std::uint64_t bits_a = (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
  const std::uint64_t bits_b = (static_cast<std::uint64_t>(out[2]) << 32) | out[3];
  const double radius = std::sqrt(-2.0 * std::log(to_open_unit(bits_a)));
  const double angle = 2.0 * std::numbers::pi * to_open_unit(bits_b);
  first = radius * std::cos(angle);
  second = radius * std::sin(angle);
}

}  // namespace

Philox4x32Counter philox4x32_10(Philox4x32Counter ctr, Philox4x32Key key) {
  for (int round = 0; round < 10; ++round) {
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kPhiloxM0, ctr[0], hi0, lo0);
    mulhilo(kPhiloxM1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kPhiloxW0;
    key[1] += kPhiloxW1;
  }
  return ctr;
}

double NormalStream::normal_at(std::uint64_t key, std::uint64_t index) {
  double first, second;
  box_muller_pair(key, index / 2, first, second);
  return (index % 2 == 0) ? first : second;
}

double NormalStream::next() {
  double value;
  if (has_cached_) {
    value = cached_;
    has_cached_ = false;
  } else {
    box_muller_pair(key_, position_ / 2, value, cached_);
    has_cached_ = true;
  }
  ++position_;
  return value;
}

double NormalStream::next_uniform() {
  // Uniforms live in a separate counter domain (high word set) so they never
  // alias the normal draws of the same key.
  const auto out = philox4x32_10({static_cast<std::uint32_t>(uniform_block_),
                                  static_cast<std::uint32_t>(uniform_block_ >> 32), 1u, 0u},
                                 split_key(key_));
  ++uniform_block_;
  return to_open_unit((static_cast<std::uint64_t>(out[0]) << 32) | out[1]);
}

}  // namespace spheresel::rng
