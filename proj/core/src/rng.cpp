#include "unideal/rng.hpp"

#include <cmath>
#include <numeric>

#include "unideal/errors.hpp"

namespace unideal {

namespace {

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

std::uint64_t scramble(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t absorb(std::uint64_t h, std::uint64_t part) {
  h ^= part + kGolden + (h << 6) + (h >> 2);
  return scramble(h);
}

}  // namespace

std::uint64_t Rng::next_u64() {
  state_ += kGolden;
  return scramble(state_);
}

double Rng::uniform() {
  // 53 random bits -> [0, 1).
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

int Rng::uniform_int(int n) {
  if (n < 1) {
    throw InvalidInputError("uniform_int requires n >= 1");
  }
  return static_cast<int>(
      (static_cast<unsigned __int128>(next_u64()) * static_cast<unsigned __int128>(n)) >> 64);
}

double Rng::normal() {
  const double u1 = 1.0 - uniform();  // (0, 1], keeps log finite
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

double Rng::gamma(double shape) {
  if (shape <= 0.0) {
    throw InvalidInputError("gamma shape must be positive");
  }
  if (shape < 1.0) {
    const double u = 1.0 - uniform();
    return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x;
    double v;
    do {
      x = normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = 1.0 - uniform();
    if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) {
      return d * v;
    }
  }
}

std::vector<double> Rng::dirichlet(double alpha, int k) {
  if (alpha <= 0.0 || k < 1) {
    throw InvalidInputError("dirichlet requires alpha > 0 and k >= 1");
  }
  std::vector<double> draws(static_cast<std::size_t>(k));
  double total = 0.0;
  for (auto& d : draws) {
    d = gamma(alpha);
    total += d;
  }
  if (total <= 0.0) {
    // All-underflow is astronomically unlikely; fall back to uniform.
    for (auto& d : draws) d = 1.0 / k;
    return draws;
  }
  for (auto& d : draws) d /= total;
  return draws;
}

std::vector<int> Rng::permutation(int n) {
  std::vector<int> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  shuffle(idx);
  return idx;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a) {
  return absorb(scramble(seed ^ kGolden), a);
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  return absorb(mix_seed(seed, a), b);
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b,
                       std::uint64_t c) {
  return absorb(mix_seed(seed, a, b), c);
}

}  // namespace unideal
