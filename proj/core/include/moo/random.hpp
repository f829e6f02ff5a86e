#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace moo {

/// Seeded generator with platform-independent output.
///
/// The engine is std::mt19937_64, whose sequence the standard fixes. The
/// standard distributions are implementation-defined, so the derived draws
/// are spelled out here: uniform doubles take the top 53 bits, normals use
/// Box-Muller (one pair per call, second value discarded), bounded integers
/// use rejection sampling, and shuffles are Fisher-Yates from the back.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double normal();

  /// Uniform in [0, n).
  std::size_t index(std::size_t n);

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[index(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

/// Seed for an independent substream (splitmix64 of seed and stream id).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace moo
