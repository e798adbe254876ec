#include "r2s/rng.hpp"

#include <cmath>

namespace r2s {

namespace {

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;
constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

std::uint64_t splitmix_finalize(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = kFnvOffset;
  for (const char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= kFnvPrime;
  }
  return h;
}

std::uint64_t stream_key(std::uint64_t global_seed, std::string_view item_id,
                         std::uint64_t epoch, std::string_view stage) {
  std::string s = std::to_string(global_seed);
  s += ':';
  s += item_id;
  s += ':';
  s += std::to_string(epoch);
  s += ':';
  s += stage;
  return fnv1a64(s);
}

std::uint64_t CounterRng::bits(std::uint64_t counter) const {
  return splitmix_finalize(key_ + (counter + 1) * kGolden);
}

double CounterRng::uniform(std::uint64_t counter) const {
  return static_cast<double>(bits(counter) >> 11) * 0x1.0p-53;
}

double CounterRng::uniform(std::uint64_t counter, double lo, double hi) const {
  return lo + (hi - lo) * uniform(counter);
}

double CounterRng::normal(std::uint64_t counter) const {
  // 1 - u keeps the log argument in (0, 1].
  const double u1 = 1.0 - uniform(2 * counter);
  const double u2 = uniform(2 * counter + 1);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

}  // namespace r2s
