#pragma once

#include <cstdint>
#include <utility>
#include <vector>

namespace unideal {

// Deterministic SplitMix64 stream with hand-rolled samplers.
//
// The standard <random> distributions are not bit-reproducible across
// standard-library implementations, so every sampler here is spelled out.
// Fixed-seed regression fixtures depend on this exact sequence.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64();

  // Uniform double in [0, 1).
  double uniform();
  double uniform(double lo, double hi);

  // Uniform integer in [0, n). Requires n >= 1.
  int uniform_int(int n);

  // Standard normal via Box-Muller (two uniforms per draw).
  double normal();

  // Gamma(shape, 1) via Marsaglia-Tsang; shape > 0.
  double gamma(double shape);

  // Symmetric Dirichlet(alpha) over k components.
  std::vector<double> dirichlet(double alpha, int k);

  // Fisher-Yates.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
      std::swap(v[i], v[uniform_int(i + 1)]);
    }
  }

  // Random permutation of [0, n).
  std::vector<int> permutation(int n);

 private:
  std::uint64_t state_;
};

// Mixes a base seed with stream tags so that independent simulator components
// (per-client init, per-round training, data generation, ...) get isolated
// streams from one experiment seed.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a);
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b);
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b,
                       std::uint64_t c);

}  // namespace unideal
