#pragma once

// Seeded randomness with explicit transforms. std::mt19937_64 is fully
// specified by the standard, and the uniform/normal conversions below avoid
// the implementation-defined std::*_distribution classes, so a seed pins the
// whole stream.

#include <cstdint>
#include <string_view>
#include <random>

#include "matweight/matops.hpp"

namespace matweight {

// One step of the splitmix64 generator; used for seed derivation.
std::uint64_t splitmix64(std::uint64_t& state);

// Stable sub-seed for a named stream, so one top-level seed can feed several
// independent consumers ("weights", "sigma", "grids", ...).
std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream_name);

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform01();                        // [0, 1)
  double uniform(double lo, double hi);      // [lo, hi)
  double normal();                           // standard normal, Box-Muller
  int bit();                                 // fair coin
  std::uint64_t integer(std::uint64_t bound);  // unbiased draw from [0, bound)
  Vec unit_vector(int n);                    // uniform on the unit sphere

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace matweight
