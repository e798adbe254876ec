#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace r2s {

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes);

/// Stream key for the string "{global_seed}:{item_id}:{epoch}:{stage}".
/// This layout is part of the reproducibility contract; do not change it.
std::uint64_t stream_key(std::uint64_t global_seed, std::string_view item_id,
                         std::uint64_t epoch, std::string_view stage);

/// Counter-based generator: draw i of a stream is a pure function of
/// (key, i), so any element can be generated independently of the others.
/// The mapping is the SplitMix64 finalizer applied to key + (i + 1) * golden.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key) : key_(key) {}

  std::uint64_t key() const { return key_; }

  std::uint64_t bits(std::uint64_t counter) const;
  /// Uniform in [0, 1) with 53 random bits.
  double uniform(std::uint64_t counter) const;
  /// Uniform in [lo, hi).
  double uniform(std::uint64_t counter, double lo, double hi) const;
  /// Standard normal via Box-Muller; consumes counters 2c and 2c + 1.
  double normal(std::uint64_t counter) const;

 private:
  std::uint64_t key_;
};

}  // namespace r2s
