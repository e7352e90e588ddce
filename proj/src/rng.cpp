#include "gppm/rng.hpp"

#include <cmath>

#include "gppm/errors.hpp"

namespace gppm {
namespace {

// splitmix64 finalizer; decorrelates sequential stream indices.
std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t x = a + 0x9E3779B97F4A7C15ull * (b + 1);
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

}  // namespace

Rng Rng::stream(std::uint64_t seed, std::uint64_t k) { return Rng(mix(seed, k)); }

double Rng::uniform() {
  // 53 random bits into [0, 1).
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::uniform_pos() { return 1.0 - uniform(); }

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u, v, s;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double m = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * m;
  has_spare_ = true;
  return u * m;
}

double Rng::exponential(double rate) {
  if (!(rate > 0.0)) throw ValidationError("Rng::exponential: rate must be positive");
  return -std::log(uniform_pos()) / rate;
}

double Rng::gamma(double shape, double rate) {
  if (!(shape > 0.0) || !(rate > 0.0))
    throw ValidationError("Rng::gamma: shape and rate must be positive");
  if (shape < 1.0) {
    // Boost: G(a) = G(a+1) * U^{1/a}.
    const double u = uniform_pos();
    return gamma(shape + 1.0, rate) * std::pow(u, 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform_pos();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v / rate;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v / rate;
  }
}

double Rng::beta(double a, double b) {
  const double x = gamma(a, 1.0);
  const double y = gamma(b, 1.0);
  return x / (x + y);
}

std::uint64_t Rng::integer(std::uint64_t n) {
  if (n == 0) throw ValidationError("Rng::integer: n must be positive");
  const std::uint64_t lim = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= lim);
  return x % n;
}

int Rng::integer_range(int lo, int hi) {
  if (hi < lo) throw ValidationError("Rng::integer_range: hi < lo");
  return lo + static_cast<int>(integer(static_cast<std::uint64_t>(hi - lo) + 1));
}

}  // namespace gppm
