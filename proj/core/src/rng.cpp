#include "kpcalib/rng.hpp"

#include <cmath>
#include <numbers>

namespace kpcalib {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
constexpr std::uint64_t kStreamSalt = 0x632BE59BD9B4E019ULL;
}  // namespace

std::uint64_t SplitMix64Mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t stream)
    : key_(SplitMix64Mix(seed ^ SplitMix64Mix(stream + kStreamSalt))) {}

std::uint64_t CounterRng::NextU64() {
  ++counter_;
  return SplitMix64Mix(key_ + counter_ * kGolden);
}

double CounterRng::Uniform01() {
  return static_cast<double>(NextU64() >> 11) * 0x1.0p-53;
}

double CounterRng::Uniform(double lo, double hi) {
  if (lo == hi) {
    NextU64();
    return lo;
  }
  return lo + (hi - lo) * Uniform01();
}

double CounterRng::Normal() {
  // 1 - U keeps the log argument in (0, 1].
  const double u1 = 1.0 - Uniform01();
  const double u2 = Uniform01();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t CounterRng::UniformIndex(std::uint64_t n) {
  // Largest multiple of n representable; draws above it are rejected.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = NextU64();
  } while (x >= limit);
  return x % n;
}

CounterRng CounterRng::Split(std::uint64_t stream) const {
  return CounterRng(KeyTag{}, SplitMix64Mix(key_ ^ SplitMix64Mix(stream + kStreamSalt)));
}

}  // namespace kpcalib
