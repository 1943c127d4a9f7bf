#include "matweight/dyadic.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "matweight/rng.hpp"

namespace matweight {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

std::string describe(DyadicInterval i) {
  return "(level " + std::to_string(i.level) + ", index " + std::to_string(i.index) + ")";
}

}  // namespace

// ---------------------------------------------------------------------------
// Grid
// ---------------------------------------------------------------------------

Grid::Grid(double lo, double hi, int depth) : lo_(lo), hi_(hi), depth_(depth) {
  require(std::isfinite(lo) && std::isfinite(hi) && lo < hi,
          "Grid: window must be a finite nonempty half-open interval");
  require(depth >= 0 && depth <= 24, "Grid: depth must lie in [0, 24]");
}

std::pair<double, double> Grid::endpoints(DyadicInterval i) const {
  require(contains(i), "Grid::endpoints: interval " + describe(i) + " is outside the grid");
  double w = length(i.level);
  return {lo_ + w * static_cast<double>(i.index), lo_ + w * static_cast<double>(i.index + 1)};
}

DyadicInterval Grid::parent(DyadicInterval i) const {
  require(contains(i) && i.level > 0, "Grid::parent: interval " + describe(i) + " has no parent");
  return {i.level - 1, i.index >> 1};
}

DyadicInterval Grid::left_child(DyadicInterval i) const {
  require(contains(i) && i.level < depth_,
          "Grid::left_child: interval " + describe(i) + " has no children");
  return {i.level + 1, 2 * i.index};
}

DyadicInterval Grid::right_child(DyadicInterval i) const {
  require(contains(i) && i.level < depth_,
          "Grid::right_child: interval " + describe(i) + " has no children");
  return {i.level + 1, 2 * i.index + 1};
}

int tree_distance(const Grid& grid, DyadicInterval a, DyadicInterval b) {
  require(grid.contains(a) && grid.contains(b),
          "tree_distance: intervals must belong to the grid");
  int dist = 0;
  while (a.level > b.level) {
    a = grid.parent(a);
    ++dist;
  }
  while (b.level > a.level) {
    b = grid.parent(b);
    ++dist;
  }
  while (a.index != b.index) {
    a = grid.parent(a);
    b = grid.parent(b);
    dist += 2;
  }
  return dist;
}

// ---------------------------------------------------------------------------
// Field
// ---------------------------------------------------------------------------

Field::Field(Grid grid, int dim) : grid_(grid), dim_(dim) {
  require(dim >= 1, "Field: dimension must be positive");
  values_.assign(static_cast<size_t>(grid_.num_cells()) * dim_, 0.0);
}

Field::Field(Grid grid, int dim, Vec values) : grid_(grid), dim_(dim), values_(std::move(values)) {
  require(dim >= 1, "Field: dimension must be positive");
  require(static_cast<std::int64_t>(values_.size()) == grid_.num_cells() * dim_,
          "Field: value array does not match num_cells * dim");
}

double Field::l2_norm() const {
  double s = 0.0;
  for (double x : values_) s += x * x;
  return std::sqrt(s * grid_.cell_width());
}

// ---------------------------------------------------------------------------
// HaarCoefficients
// ---------------------------------------------------------------------------

HaarCoefficients::HaarCoefficients(Grid grid, int dim) : grid_(grid), dim_(dim) {
  require(dim >= 1, "HaarCoefficients: dimension must be positive");
  levels_.resize(grid_.depth());
  for (int n = 0; n < grid_.depth(); ++n)
    levels_[n].assign(static_cast<size_t>(grid_.num_intervals(n)) * dim_, 0.0);
  mean_.assign(dim_, 0.0);
}

double* HaarCoefficients::at(DyadicInterval i) {
  require(i.level >= 0 && i.level < grid_.depth() && i.index >= 0 &&
              i.index < grid_.num_intervals(i.level),
          "HaarCoefficients::at: interval " + describe(i) + " carries no coefficient");
  return levels_[i.level].data() + static_cast<size_t>(i.index) * dim_;
}

const double* HaarCoefficients::at(DyadicInterval i) const {
  return const_cast<HaarCoefficients*>(this)->at(i);
}

double HaarCoefficients::squared_mass() const {
  double s = 0.0;
  for (const Vec& level : levels_)
    for (double x : level) s += x * x;
  for (double x : mean_) s += x * x;
  return s;
}

void HaarCoefficients::scale(double s) {
  for (Vec& level : levels_)
    for (double& x : level) x *= s;
  for (double& x : mean_) x *= s;
}

HaarCoefficients& HaarCoefficients::operator+=(const HaarCoefficients& rhs) {
  require(grid_ == rhs.grid_ && dim_ == rhs.dim_, "HaarCoefficients: grid/dim mismatch in +=");
  for (size_t n = 0; n < levels_.size(); ++n)
    for (size_t i = 0; i < levels_[n].size(); ++i) levels_[n][i] += rhs.levels_[n][i];
  for (size_t i = 0; i < mean_.size(); ++i) mean_[i] += rhs.mean_[i];
  return *this;
}

HaarCoefficients& HaarCoefficients::operator-=(const HaarCoefficients& rhs) {
  require(grid_ == rhs.grid_ && dim_ == rhs.dim_, "HaarCoefficients: grid/dim mismatch in -=");
  for (size_t n = 0; n < levels_.size(); ++n)
    for (size_t i = 0; i < levels_[n].size(); ++i) levels_[n][i] -= rhs.levels_[n][i];
  for (size_t i = 0; i < mean_.size(); ++i) mean_[i] -= rhs.mean_[i];
  return *this;
}

double HaarCoefficients::max_abs_difference(const HaarCoefficients& rhs) const {
  require(grid_ == rhs.grid_ && dim_ == rhs.dim_, "HaarCoefficients: grid/dim mismatch");
  double m = 0.0;
  for (size_t n = 0; n < levels_.size(); ++n)
    for (size_t i = 0; i < levels_[n].size(); ++i)
      m = std::max(m, std::fabs(levels_[n][i] - rhs.levels_[n][i]));
  for (size_t i = 0; i < mean_.size(); ++i) m = std::max(m, std::fabs(mean_[i] - rhs.mean_[i]));
  return m;
}

// ---------------------------------------------------------------------------
// analysis / synthesis
// ---------------------------------------------------------------------------

HaarCoefficients haar_decompose(const Field& f, const Grid& grid) {
  require(f.grid() == grid, "haar_decompose: field lives on a different grid/window");
  const int dim = f.dim();
  const int depth = grid.depth();
  HaarCoefficients out(grid, dim);

  // Scaling coefficients at the leaf level: cell value times sqrt(cell width).
  const double leaf_scale = std::sqrt(grid.cell_width());
  Vec scaling(f.values());
  for (double& x : scaling) x *= leaf_scale;

  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  for (int n = depth - 1; n >= 0; --n) {
    std::int64_t count = grid.num_intervals(n);
    Vec next(static_cast<size_t>(count) * dim);
    for (std::int64_t k = 0; k < count; ++k) {
      const double* a = scaling.data() + static_cast<size_t>(2 * k) * dim;      // left half
      const double* b = scaling.data() + static_cast<size_t>(2 * k + 1) * dim;  // right half
      double* coeff = out.at({n, k});
      double* sum = next.data() + static_cast<size_t>(k) * dim;
      for (int j = 0; j < dim; ++j) {
        coeff[j] = (b[j] - a[j]) * inv_sqrt2;  // right minus left
        sum[j] = (a[j] + b[j]) * inv_sqrt2;
      }
    }
    scaling = std::move(next);
  }
  for (int j = 0; j < dim; ++j) out.mean()[j] = scaling[j];
  return out;
}

Field haar_reconstruct(const HaarCoefficients& coeffs, const Grid& grid) {
  require(coeffs.grid() == grid, "haar_reconstruct: coefficients live on a different grid/window");
  const int dim = coeffs.dim();
  const int depth = grid.depth();

  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  Vec scaling(coeffs.mean());
  for (int n = 0; n < depth; ++n) {
    std::int64_t count = grid.num_intervals(n);
    Vec next(static_cast<size_t>(2 * count) * dim);
    for (std::int64_t k = 0; k < count; ++k) {
      const double* sum = scaling.data() + static_cast<size_t>(k) * dim;
      const double* coeff = coeffs.at({n, k});
      double* a = next.data() + static_cast<size_t>(2 * k) * dim;
      double* b = next.data() + static_cast<size_t>(2 * k + 1) * dim;
      for (int j = 0; j < dim; ++j) {
        a[j] = (sum[j] - coeff[j]) * inv_sqrt2;
        b[j] = (sum[j] + coeff[j]) * inv_sqrt2;
      }
    }
    scaling = std::move(next);
  }

  const double inv_leaf_scale = 1.0 / std::sqrt(grid.cell_width());
  for (double& x : scaling) x *= inv_leaf_scale;
  return Field(grid, dim, std::move(scaling));
}

// ---------------------------------------------------------------------------
// ShiftedGrid
// ---------------------------------------------------------------------------

ShiftedGrid::ShiftedGrid(double dilation, std::vector<int> bits, int level_min, int level_max,
                         double window_lo, double window_hi)
    : dilation_(dilation),
      bits_(std::move(bits)),
      level_min_(level_min),
      level_max_(level_max),
      window_lo_(window_lo),
      window_hi_(window_hi) {
  require(dilation >= 1.0 && dilation < 2.0, "ShiftedGrid: dilation must lie in [1, 2)");
  require(level_min <= level_max, "ShiftedGrid: level range is empty");
  require(level_max - level_min <= 40, "ShiftedGrid: level range is too wide");
  require(std::isfinite(window_lo) && std::isfinite(window_hi) && window_lo < window_hi,
          "ShiftedGrid: window must be a finite nonempty half-open interval");
  require(static_cast<int>(bits_.size()) == level_max - level_min,
          "ShiftedGrid: need one translation bit per level transition");
  for (int b : bits_)
    require(b == 0 || b == 1, "ShiftedGrid: translation bits must be 0 or 1");

  // Offsets accumulate from the finest level upward: w_max = 0.
  const int nlevels = level_max_ - level_min_ + 1;
  offsets_.assign(nlevels, 0.0);
  for (int n = level_max_ - 1; n >= level_min_; --n) {
    double finer = offsets_[n - level_min_ + 1];
    offsets_[n - level_min_] = finer + static_cast<double>(bit(n + 1)) * std::ldexp(1.0, -(n + 1));
  }

  range_first_.assign(nlevels, 0);
  range_count_.assign(nlevels, 0);
  bool any = false;
  for (int n = level_min_; n <= level_max_; ++n) {
    double w = std::ldexp(1.0, -n);
    double off = offsets_[n - level_min_];
    // Need r*(k w + off) >= window_lo and r*((k+1) w + off) <= window_hi.
    double kmin = std::ceil((window_lo_ / dilation_ - off) / w);
    double kmax = std::floor((window_hi_ / dilation_ - off) / w) - 1.0;
    if (kmax >= kmin) {
      range_first_[n - level_min_] = static_cast<std::int64_t>(kmin);
      range_count_[n - level_min_] = static_cast<std::int64_t>(kmax - kmin) + 1;
      any = true;
    }
  }
  require(any, "ShiftedGrid: window holds no interval at any level in range");
}

int ShiftedGrid::bit(int level) const {
  require(level > level_min_ && level <= level_max_,
          "ShiftedGrid::bit: level " + std::to_string(level) + " has no transition bit");
  return bits_[level - level_min_ - 1];
}

double ShiftedGrid::offset(int level) const {
  require(level >= level_min_ && level <= level_max_, "ShiftedGrid::offset: level out of range");
  return offsets_[level - level_min_];
}

std::int64_t ShiftedGrid::first_index(int level) const {
  require(level >= level_min_ && level <= level_max_, "ShiftedGrid: level out of range");
  return range_first_[level - level_min_];
}

std::int64_t ShiftedGrid::num_intervals(int level) const {
  require(level >= level_min_ && level <= level_max_, "ShiftedGrid: level out of range");
  return range_count_[level - level_min_];
}

bool ShiftedGrid::contains(DyadicInterval i) const {
  if (i.level < level_min_ || i.level > level_max_) return false;
  std::int64_t first = range_first_[i.level - level_min_];
  return i.index >= first && i.index < first + range_count_[i.level - level_min_];
}

std::pair<double, double> ShiftedGrid::endpoints(DyadicInterval i) const {
  require(contains(i), "ShiftedGrid::endpoints: interval " + describe(i) + " is not a member");
  double w = std::ldexp(1.0, -i.level);
  double off = offsets_[i.level - level_min_];
  double a = dilation_ * (static_cast<double>(i.index) * w + off);
  double b = dilation_ * (static_cast<double>(i.index + 1) * w + off);
  return {a, b};
}

double ShiftedGrid::length(int level) const {
  require(level >= level_min_ && level <= level_max_, "ShiftedGrid::length: level out of range");
  return dilation_ * std::ldexp(1.0, -level);
}

DyadicInterval ShiftedGrid::parent(DyadicInterval i) const {
  require(contains(i), "ShiftedGrid::parent: interval " + describe(i) + " is not a member");
  require(i.level > level_min_, "ShiftedGrid::parent: already at the coarsest level");
  int b = bit(i.level);
  // Floor division that also handles negative indices.
  std::int64_t shifted = i.index - b;
  std::int64_t p = shifted >= 0 ? shifted / 2 : -((-shifted + 1) / 2);
  DyadicInterval parent{i.level - 1, p};
  require(contains(parent),
          "ShiftedGrid::parent: parent of " + describe(i) + " falls outside the window");
  return parent;
}

DyadicInterval ShiftedGrid::left_child(DyadicInterval i) const {
  require(contains(i), "ShiftedGrid::left_child: interval " + describe(i) + " is not a member");
  require(i.level < level_max_, "ShiftedGrid::left_child: already at the finest level");
  return {i.level + 1, 2 * i.index + bit(i.level + 1)};
}

DyadicInterval ShiftedGrid::right_child(DyadicInterval i) const {
  require(contains(i), "ShiftedGrid::right_child: interval " + describe(i) + " is not a member");
  require(i.level < level_max_, "ShiftedGrid::right_child: already at the finest level");
  return {i.level + 1, 2 * i.index + bit(i.level + 1) + 1};
}

double ShiftedGrid::haar_value(DyadicInterval i, double x) const {
  auto [a, b] = endpoints(i);
  if (x < a || x >= b) return 0.0;
  double mid = 0.5 * (a + b);
  double scale = 1.0 / std::sqrt(b - a);
  return x < mid ? -scale : scale;
}

int tree_distance(const ShiftedGrid& grid, DyadicInterval a, DyadicInterval b) {
  require(grid.contains(a) && grid.contains(b),
          "tree_distance: intervals must belong to the grid");
  int dist = 0;
  auto lift = [&grid, &dist](DyadicInterval& i) {
    if (i.level <= grid.level_min())
      throw std::invalid_argument("tree_distance: no common ancestor inside the level range");
    i = grid.parent(i);
    ++dist;
  };
  while (a.level > b.level) lift(a);
  while (b.level > a.level) lift(b);
  while (a.index != b.index) {
    lift(a);
    lift(b);
  }
  return dist;
}

ShiftedGrid make_shifted_grid(double dilation, const std::vector<int>& bits, int level_min,
                              int level_max, double window_lo, double window_hi) {
  return ShiftedGrid(dilation, bits, level_min, level_max, window_lo, window_hi);
}

ShiftedGrid sample_shifted_grid(std::uint64_t seed, int level_min, int level_max,
                                double window_lo, double window_hi, bool dilate) {
  Rng rng(seed);
  // Density 1/(r log 2) on [1, 2) is exactly r = 2^u with u uniform on [0, 1).
  double r = dilate ? std::exp2(rng.uniform01()) : 1.0;
  if (r >= 2.0) r = std::nextafter(2.0, 1.0);
  std::vector<int> bits(static_cast<size_t>(level_max - level_min));
  for (int& b : bits) b = rng.bit();
  return ShiftedGrid(r, std::move(bits), level_min, level_max, window_lo, window_hi);
}

}  // namespace matweight
