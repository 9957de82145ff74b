#pragma once

#include <cstdint>

namespace kpcalib {

// Counter-based 64-bit generator. Draw i of stream (seed, stream) is
// SplitMix64Mix(key + (i + 1) * 0x9E3779B97F4A7C15) with
// key = SplitMix64Mix(seed ^ SplitMix64Mix(stream + 0x632BE59BD9B4E019)).
// Streams are independent, so per-frame or per-task streams give the same
// numbers regardless of scheduling. Floating-point outputs are built from
// the integer stream with fixed formulas (no std:: distributions, whose
// output differs between standard libraries).
std::uint64_t SplitMix64Mix(std::uint64_t z);

class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t NextU64();
  // Uniform in [0, 1) with 53 random bits.
  double Uniform01();
  // lo + (hi - lo) * Uniform01(); returns exactly lo when lo == hi.
  double Uniform(double lo, double hi);
  // Standard normal via Box-Muller; consumes two draws per call.
  double Normal();
  // Uniform integer in [0, n), n > 0, unbiased (rejection sampling).
  std::uint64_t UniformIndex(std::uint64_t n);
  bool Bernoulli(double p) { return Uniform01() < p; }

  // Child stream derived from this generator's key; does not advance it.
  CounterRng Split(std::uint64_t stream) const;

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

 private:
  struct KeyTag {};
  CounterRng(KeyTag, std::uint64_t key) : key_(key) {}

  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

}  // namespace kpcalib
