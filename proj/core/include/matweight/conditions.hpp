#pragma once

// Weight condition scans. Each scan walks every dyadic interval of the grid
// (levels 0 through the leaves), reports the extremal constant, and keeps a
// witness: the first interval attaining the maximum in (level, index) order.

#include <optional>
#include <string>
#include <vector>

#include "matweight/weights.hpp"

namespace matweight {

struct ConditionReport {
  std::string condition;  // "joint_a2" | "a2_zero" | "reverse_holder"
  double constant = 0.0;
  DyadicInterval witness;
  std::optional<Vec> direction;  // maximizing direction, when one exists
  std::optional<double> r;       // integrability exponent (reverse_holder only)
  int depth_scanned = 0;

  std::string to_json() const;
};

// max over intervals I of || <V^-1>_I^{1/2} <U>_I <V^-1>_I^{1/2} ||.
// The direction is the top eigenvector of the witness matrix.
ConditionReport joint_a2(const MatrixWeight& u, const MatrixWeight& v);

// max over intervals I of det(<W>_I) / exp(<log det W>_I), evaluated through
// log-determinants. Always >= 1; equality when W is constant.
ConditionReport a2_zero(const MatrixWeight& w);

// max over intervals I and unit directions y of
//   ( avg over I of || W^{1/2}(x) <W>_I^{-1/2} y ||^r )^{1/r}.
// The direction set is the canonical basis, num_directions seeded sphere
// samples, and the eigenvectors of <W>_I. Requires r > 2.
ConditionReport reverse_holder(const MatrixWeight& w, double r, int num_directions = 64,
                               std::uint64_t seed = 0);

// Exponent ladder for the integrability search.
const std::vector<double>& reverse_holder_ladder();

// Largest ladder exponent whose reverse Holder constant stays within budget;
// nullopt when even the smallest exponent exceeds it. Also returns the report
// of the selected exponent (or of the smallest one when none qualifies).
std::pair<std::optional<double>, ConditionReport> rh_exponent_search(
    const MatrixWeight& w, double budget, int num_directions = 64, std::uint64_t seed = 0);

}  // namespace matweight
