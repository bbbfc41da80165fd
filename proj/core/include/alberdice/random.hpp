#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace alberdice {

// std distributions are implementation-defined, so draws are built directly
// from the engine's bits to keep seeded runs identical across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t bits() { return engine_(); }
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double normal();
  // Index drawn with probability proportional to weights (assumed >= 0, sum > 0).
  int categorical(std::span<const double> weights);
  int below(int n) { return static_cast<int>(uniform() * n); }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Stream derivation for per-seed / per-agent substreams.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace alberdice
