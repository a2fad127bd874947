#pragma once

// Seeded random source shared by the generators and the Gibbs sampler.
//
// The engine is std::mt19937_64, whose output sequence is fixed by the C++
// standard. Distribution transforms are written out here instead of using
// <random> distributions, whose algorithms are implementation-defined:
//   uniform()   : (next() >> 11) * 2^-53, in [0, 1)
//   normal()    : Box-Muller, one value per call (the sine branch is dropped)
//   gamma(k,s)  : Marsaglia-Tsang squeeze, with the k < 1 boost u^(1/k)
//   below(n)    : floor(uniform() * n)
// Derived seeds use SplitMix64 over (seed ^ golden * stream).

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace cyborg {

std::uint64_t splitmix64(std::uint64_t x) noexcept;

// Deterministic seed for an independent sub-stream (per agent, per stage).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept;

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  std::size_t below(std::size_t n);
  bool bernoulli(double p) { return uniform() < p; }
  double normal();
  double normal(double mean, double sd) { return mean + sd * normal(); }
  double gamma(double shape, double scale);
  double lognormal(double mu, double sigma);

  // Index drawn proportionally to nonnegative weights; weights must not all be 0.
  std::size_t categorical(std::span<const double> weights);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = below(i);
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace cyborg
