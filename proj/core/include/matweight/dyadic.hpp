#pragma once

// Dyadic machinery on a half-open window: the standard binary tree over a
// uniform leaf mesh, Haar analysis/synthesis, tree distance, and randomly
// translated/dilated grids.
//
// Sign convention for the Haar function on an interval I with left half L and
// right half R:  h_I = |I|^{-1/2} (indicator(R) - indicator(L)).

#include <cstdint>
#include <utility>
#include <vector>

#include "matweight/matops.hpp"

namespace matweight {

struct DyadicInterval {
  int level = 0;
  std::int64_t index = 0;

  friend bool operator==(const DyadicInterval&, const DyadicInterval&) = default;
  friend auto operator<=>(const DyadicInterval&, const DyadicInterval&) = default;
};

// The standard dyadic tree over a window [lo, hi): level n holds 2^n
// intervals, level `depth` is the leaf mesh that functions and weights live
// on. Haar coefficients exist for levels 0 .. depth-1.
class Grid {
 public:
  Grid(double lo, double hi, int depth);

  double lo() const { return lo_; }
  double hi() const { return hi_; }
  int depth() const { return depth_; }

  std::int64_t num_cells() const { return std::int64_t{1} << depth_; }
  double cell_width() const { return (hi_ - lo_) / static_cast<double>(num_cells()); }
  std::int64_t num_intervals(int level) const { return std::int64_t{1} << level; }
  // Total count of coefficient-carrying intervals (levels above the leaves).
  std::int64_t num_haar() const { return (std::int64_t{1} << depth_) - 1; }

  double length(int level) const { return (hi_ - lo_) / static_cast<double>(std::int64_t{1} << level); }
  std::pair<double, double> endpoints(DyadicInterval i) const;

  bool contains(DyadicInterval i) const {
    return i.level >= 0 && i.level <= depth_ && i.index >= 0 && i.index < num_intervals(i.level);
  }

  DyadicInterval root() const { return {0, 0}; }
  DyadicInterval parent(DyadicInterval i) const;
  DyadicInterval left_child(DyadicInterval i) const;
  DyadicInterval right_child(DyadicInterval i) const;

  // Leaf-cell range [begin, end) covered by an interval.
  std::int64_t cells_begin(DyadicInterval i) const { return i.index << (depth_ - i.level); }
  std::int64_t cells_end(DyadicInterval i) const { return (i.index + 1) << (depth_ - i.level); }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  double lo_;
  double hi_;
  int depth_;
};

// Hops through the tree between two intervals of the same grid (parent steps
// from each up to the lowest common ancestor).
int tree_distance(const Grid& grid, DyadicInterval a, DyadicInterval b);

// Piecewise-constant R^dim valued function on the leaf mesh of a grid.
// Values are stored cell-major: component j of cell i sits at [i*dim + j].
class Field {
 public:
  Field(Grid grid, int dim);
  Field(Grid grid, int dim, Vec values);

  const Grid& grid() const { return grid_; }
  int dim() const { return dim_; }
  std::int64_t num_cells() const { return grid_.num_cells(); }

  double& at(std::int64_t cell, int component) { return values_[cell * dim_ + component]; }
  double at(std::int64_t cell, int component) const { return values_[cell * dim_ + component]; }
  Vec& values() { return values_; }
  const Vec& values() const { return values_; }

  double l2_norm() const;  // with respect to the mesh measure

 private:
  Grid grid_;
  int dim_;
  Vec values_;
};

// Haar coefficients of a field: one R^dim coefficient per interval at levels
// 0 .. depth-1, plus the coefficient of the normalized root indicator (the
// "mean slot"). Operators built on Haar sums leave the mean slot at zero.
class HaarCoefficients {
 public:
  HaarCoefficients(Grid grid, int dim);

  const Grid& grid() const { return grid_; }
  int dim() const { return dim_; }

  double* at(DyadicInterval i);
  const double* at(DyadicInterval i) const;
  Vec& mean() { return mean_; }
  const Vec& mean() const { return mean_; }

  // Squared coefficient mass, mean slot included. By Parseval this equals the
  // squared L2 norm of the synthesized function.
  double squared_mass() const;

  void scale(double s);
  HaarCoefficients& operator+=(const HaarCoefficients& rhs);
  HaarCoefficients& operator-=(const HaarCoefficients& rhs);
  double max_abs_difference(const HaarCoefficients& rhs) const;

 private:
  Grid grid_;
  int dim_;
  std::vector<Vec> levels_;  // levels_[n] has (2^n * dim) entries
  Vec mean_;
};

// Exact pyramid analysis/synthesis. Round trips are exact to rounding.
HaarCoefficients haar_decompose(const Field& f, const Grid& grid);
Field haar_reconstruct(const HaarCoefficients& coeffs, const Grid& grid);

// A randomly translated and dilated dyadic lattice, truncated to a window and
// a level range. Level n intervals are r * [k 2^-n + w_n, (k+1) 2^-n + w_n)
// where the offset w_n = sum_{j>n} bits[j] 2^-j accumulates the translation
// bits of the finer levels; only intervals fully inside the window belong to
// the grid. Consistency: the two children of a member interval are members of
// the next level (until the level range runs out).
class ShiftedGrid {
 public:
  ShiftedGrid(double dilation, std::vector<int> bits, int level_min, int level_max,
              double window_lo, double window_hi);

  double dilation() const { return dilation_; }
  int level_min() const { return level_min_; }
  int level_max() const { return level_max_; }
  double window_lo() const { return window_lo_; }
  double window_hi() const { return window_hi_; }

  int bit(int level) const;       // translation bit linking level-1 to level
  double offset(int level) const; // w_n above

  // Contiguous index range of member intervals at a level.
  std::int64_t first_index(int level) const;
  std::int64_t num_intervals(int level) const;
  bool contains(DyadicInterval i) const;

  std::pair<double, double> endpoints(DyadicInterval i) const;
  double length(int level) const;

  DyadicInterval parent(DyadicInterval i) const;
  DyadicInterval left_child(DyadicInterval i) const;
  DyadicInterval right_child(DyadicInterval i) const;

  // Haar function of a member interval evaluated at a point (half-open halves).
  double haar_value(DyadicInterval i, double x) const;

 private:
  double dilation_;
  std::vector<int> bits_;  // bits_[level - level_min - 1] for level in (level_min, level_max]
  int level_min_;
  int level_max_;
  double window_lo_;
  double window_hi_;
  std::vector<double> offsets_;            // per level
  std::vector<std::int64_t> range_first_;  // per level
  std::vector<std::int64_t> range_count_;  // per level
};

int tree_distance(const ShiftedGrid& grid, DyadicInterval a, DyadicInterval b);

// Draws the translation bits (fair coins per level) and, when dilate is true,
// a dilation r in [1,2) with density 1/(r log 2); bits and r are pinned by the
// seed. Throws if no interval of any level fits inside the window.
ShiftedGrid sample_shifted_grid(std::uint64_t seed, int level_min, int level_max,
                                double window_lo, double window_hi, bool dilate = true);

// Explicit-parameter construction helper mirroring sample_shifted_grid; the
// all-zero-bits, r = 1 grid is the standard lattice.
ShiftedGrid make_shifted_grid(double dilation, const std::vector<int>& bits, int level_min,
                              int level_max, double window_lo, double window_hi);

}  // namespace matweight
