// Deterministic splittable random streams used everywhere in this project.
//
// Algorithm: SplitMix64 (Steele, Lea & Flood 2014; Vigna's reference
// implementation). A stream is identified by (master_seed, stream_index);
// its starting state is
//
//     root = mix64(mix64(master_seed) ^ (0x9E3779B97F4A7C15 * (stream_index + 1)))
//
// and successive outputs are mix64(root += 0x9E3779B97F4A7C15). Child streams
// are derived from the parent's root (not its current position), so the
// draw history of a parent never changes its children. Reference vectors for
// the raw sequence are asserted in tests/test_rng.cpp.
#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace nssjd {

namespace detail {

inline constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ull;

inline constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace detail

class RngStream {
 public:
  explicit RngStream(std::uint64_t master_seed, std::uint64_t stream_index = 0)
      : master_seed_(master_seed),
        stream_index_(stream_index),
        root_(detail::mix64(detail::mix64(master_seed) ^
                            (detail::kGoldenGamma * (stream_index + 1)))),
        state_(root_) {}

  std::uint64_t master_seed() const { return master_seed_; }
  std::uint64_t stream_index() const { return stream_index_; }

  std::uint64_t next_u64() {
    state_ += detail::kGoldenGamma;
    return detail::mix64(state_);
  }

  // Uniform on [0, 1), 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform on (0, 1]; safe as a log() argument.
  double uniform_pos() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller; generates pairs and caches the spare.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double r = std::sqrt(-2.0 * std::log(uniform_pos()));
    const double phi = 2.0 * std::numbers::pi * uniform();
    spare_ = r * std::sin(phi);
    has_spare_ = true;
    return r * std::cos(phi);
  }

  RngStream child(std::uint64_t index) const { return RngStream(root_, index); }

 private:
  std::uint64_t master_seed_;
  std::uint64_t stream_index_;
  std::uint64_t root_;
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

inline RngStream child_stream(const RngStream& master, std::uint64_t index) {
  return master.child(index);
}

}  // namespace nssjd
