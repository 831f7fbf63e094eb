#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string>

namespace ltk {

/// Deterministic 64-bit seed derivation. Mixing is order sensitive, so
/// (generation, candidate, task, problem, run) tuples map to distinct streams.
std::uint64_t mix_seed(std::initializer_list<std::uint64_t> parts);

/// Thin wrapper over std::mt19937_64 with the handful of draws the toolkit
/// needs. Every draw is stateless apart from the engine, so serializing the
/// engine is enough to resume a stream exactly.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform();                       // [0, 1)
  double uniform(double lo, double hi);   // [lo, hi)
  double normal();                        // N(0, 1)
  double cauchy();                        // standard Cauchy
  std::size_t index(std::size_t n);       // uniform in [0, n)

  std::mt19937_64& engine() { return engine_; }

  std::string serialize() const;
  static Rng deserialize(const std::string& text);

 private:
  Rng() = default;
  std::mt19937_64 engine_;
};

}  // namespace ltk
