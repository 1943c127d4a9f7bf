#include "matweight/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace matweight {

std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream_name) {
  // FNV-1a over the name, then mix with the seed through splitmix64.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : stream_name) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  std::uint64_t state = seed ^ h;
  std::uint64_t mixed = splitmix64(state);
  return splitmix64(state) ^ mixed;
}

double Rng::uniform01() {
  // 53 random bits into [0, 1).
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) {
  return lo + (hi - lo) * uniform01();
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform01();
  while (u1 <= 0.0) u1 = uniform01();
  double u2 = uniform01();
  double radius = std::sqrt(-2.0 * std::log(u1));
  double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

int Rng::bit() { return static_cast<int>(engine_() >> 63); }

std::uint64_t Rng::integer(std::uint64_t bound) {
  if (bound == 0) throw std::invalid_argument("Rng::integer: bound must be positive");
  // Rejection sampling keeps the draw unbiased.
  std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
  std::uint64_t x = engine_();
  while (x >= limit) x = engine_();
  return x % bound;
}

Vec Rng::unit_vector(int n) {
  if (n <= 0) throw std::invalid_argument("Rng::unit_vector: dimension must be positive");
  Vec v(n);
  double norm2 = 0.0;
  do {
    norm2 = 0.0;
    for (int i = 0; i < n; ++i) {
      v[i] = normal();
      norm2 += v[i] * v[i];
    }
  } while (norm2 < 1e-24);
  double inv = 1.0 / std::sqrt(norm2);
  for (double& x : v) x *= inv;
  return v;
}

}  // namespace matweight
