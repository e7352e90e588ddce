#pragma once

#include <cstdint>
#include <random>

namespace gppm {

// Seeded RNG wrapping the standard 64-bit Mersenne Twister engine. The
// distribution transforms are implemented here rather than taken from
// <random> because the standard leaves their algorithms unspecified;
// keeping them in-tree makes every sampled quantity reproducible from the
// seed alone, on any platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Independent stream k derived from a base seed (per chain, per customer).
  static Rng stream(std::uint64_t seed, std::uint64_t k);

  // Uniform on [0, 1).
  double uniform();
  // Uniform on (0, 1]; safe to pass through log().
  double uniform_pos();
  // Standard normal via the Marsaglia polar method (one spare cached).
  double normal();
  // Exponential with the given rate.
  double exponential(double rate);
  // Gamma(shape, rate) via Marsaglia-Tsang squeeze; shape < 1 boosted.
  double gamma(double shape, double rate);
  // Beta(a, b) as a gamma ratio.
  double beta(double a, double b);
  bool bernoulli(double p) { return uniform() < p; }
  // Uniform integer in [0, n), rejection sampled to avoid modulo bias.
  std::uint64_t integer(std::uint64_t n);
  // Uniform integer in [lo, hi] inclusive.
  int integer_range(int lo, int hi);

  std::uint64_t raw() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace gppm
