#pragma once

// Stopping-interval machinery: a top-down selection of maximal intervals
// where one of three accumulation conditions exceeds a threshold, the
// resulting generation tree with its measure-decay report, and the free
// projections and square-function pieces the tree splits an analysis into.

#include <cstdint>
#include <string>
#include <vector>

#include "matweight/dyadic.hpp"
#include "matweight/weights.hpp"

namespace matweight {

// The three quantities compared against the threshold for a candidate I
// below a stopping parent J:
//   joint    ||<V^-1>_J^{1/2}  <U>_I     <V^-1>_J^{1/2}||
//   v_ratio  ||<V^-1>_J^{-1/2} <V^-1>_I  <V^-1>_J^{-1/2}||
//   u_ratio  ||<U>_J^{-1/2}    <U>_I     <U>_J^{-1/2}||
struct ConditionTriple {
  double joint = 0.0;
  double v_ratio = 0.0;
  double u_ratio = 0.0;

  double max_value() const;
  int triggered(double lambda) const;  // bitmask: 1 joint, 2 v_ratio, 4 u_ratio
};

ConditionTriple stopping_condition_values(const MatrixWeight& u, const MatrixWeight& v,
                                          DyadicInterval parent, DyadicInterval candidate);

// Maximal strict descendants of `parent` (leaf level included) where some
// condition exceeds lambda; sorted, pairwise disjoint.
std::vector<DyadicInterval> stopping_children(const MatrixWeight& u, const MatrixWeight& v,
                                              DyadicInterval parent, double lambda);

struct StoppingNode {
  DyadicInterval interval;
  int parent = -1;      // node id, -1 for the root
  int generation = 0;   // root is generation 0
  int triggered = 0;    // condition bitmask that fired (0 for the root)
  std::vector<int> children;
};

struct StoppingTree {
  Grid grid;
  double lambda = 0.0;
  std::vector<StoppingNode> nodes;            // nodes[0] is the root
  std::vector<std::vector<int>> generations;  // node ids per generation
  bool exhausted = false;  // true when no deeper stopping intervals exist
};

// Builds the tree from the grid root. max_generations <= 0 runs until no
// stopping interval remains (always finite: descendants shrink to leaves).
StoppingTree build_stopping_tree(const MatrixWeight& u, const MatrixWeight& v, double lambda,
                                 int max_generations = 0);

// Threshold that keeps the first-generation measure fraction at 1/2 or less:
// 6 * dim * (joint A2 constant).
double default_stopping_lambda(const MatrixWeight& u, const MatrixWeight& v);

struct DecayReport {
  std::vector<std::int64_t> counts;  // generations 1, 2, ...
  std::vector<double> fractions;     // measure of generation k over the window
  double delta_fit = 0.0;            // max over k of fractions[k]^(1/k)

  std::string to_csv() const;  // header: k,count,measure_fraction
};

DecayReport decay_report(const StoppingTree& tree);

// Intervals governed by a node: descendants of its interval (the node's own
// interval included) that are not inside any of its stopping children. The
// families of distinct nodes partition the tree under the root.
std::vector<DyadicInterval> free_family(const StoppingTree& tree, int node);

// Keeps exactly the coefficients of the node's free family.
HaarCoefficients free_projection(const StoppingTree& tree, int node, const HaarCoefficients& c);

// Largest condition values over the node's free family; each stays at or
// below lambda because the selection scanned and rejected every free
// interval.
struct FreeRegionBounds {
  double joint_max = 0.0;
  double v_ratio_max = 0.0;
  double u_ratio_max = 0.0;
};

FreeRegionBounds free_region_bounds(const MatrixWeight& u, const MatrixWeight& v,
                                    const StoppingTree& tree, int node);

// U^{1/2} applied to the synthesis of <V^-1>_I^{1/2} f_I over the node's free
// family: one localized piece of the square function.
Field square_function_term(const MatrixWeight& u, const MatrixWeight& v,
                           const StoppingTree& tree, int node, const HaarCoefficients& c);

// Pointwise root of the summed squared pieces, as a scalar field.
Field two_weight_square_function(const MatrixWeight& u, const MatrixWeight& v,
                                 const StoppingTree& tree, const HaarCoefficients& c);

// Energy of a node's square-function piece on the union of stopping
// intervals `offset` generations below it (descendants of the node only),
// against the squared mass of the node's free projection.
struct OffdiagonalEnergy {
  double energy = 0.0;
  double reference = 0.0;
  double ratio = 0.0;  // energy / reference, 0 when the reference vanishes
};

OffdiagonalEnergy offdiagonal_energy(const MatrixWeight& u, const MatrixWeight& v,
                                     const StoppingTree& tree, int node, int offset,
                                     const HaarCoefficients& c);

}  // namespace matweight
