#pragma once

// Exact Hilbert transform of piecewise-constant functions, the dyadic shift
// carried out on randomly translated/dilated grids, Monte-Carlo averaging of
// those shifts against the Hilbert transform, and an empirical weighted scan
// comparing test-function ratios with per-grid weighted shift norms.

#include <cstdint>
#include <string>
#include <vector>

#include "matweight/dyadic.hpp"
#include "matweight/weights.hpp"

namespace matweight {

// p.v. integral of f(t)/(x - t): each cell [a,b) contributes
// value * log|x - a| / |x - b|; the containing cell's contribution is the
// symmetric principal value, which vanishes when x is the cell midpoint.
// x on the boundary of a cell with a nonzero value is an error.
Vec hilbert_point(const Field& f, double x);

// Evaluation at the midpoints of `mesh`, returned as a field on `mesh`.
Field hilbert_on_mesh(const Field& f, const Grid& mesh);

// Analysis of f against the grid's Haar system (exact overlap integrals),
// the shift recurrence out(I) = c(left child) - c(right child) with the
// finest coefficient level mapped to zero, and synthesis evaluated at the
// midpoints of f's mesh. f's mesh window must equal the grid's window.
Field shift_on_grid(const ShiftedGrid& grid, const Field& f);

struct AveragingCheckpoint {
  std::int64_t sample_count = 0;
  double fitted_c = 0.0;
  double residual = 0.0;
};

struct AveragingReport {
  std::int64_t samples = 0;
  double fitted_c = 0.0;
  double residual = 0.0;
  std::vector<AveragingCheckpoint> checkpoints;

  std::string to_csv() const;  // header: sample_count,fitted_c,residual
};

struct AveragingOptions {
  int level_min = -6;
  int level_max = 6;
  std::int64_t num_samples = 200;
  bool dilate = true;
  std::vector<std::int64_t> checkpoints;  // empty: record only the final count
};

// Mean of shift_on_grid over grids sampled from (fair translation bits,
// dilation density 1/(r log 2)); one sub-seed per sample index.
Field mc_average_field(const Field& f, const AveragingOptions& options, std::uint64_t seed);

struct McAverageResult {
  Field average;
  AveragingReport report;
};

// Averages the sampled shifts and fits c minimizing ||c * avg - Hf|| in
// least squares over the interior evaluation points (outer 10% of the window
// on each side excluded); the residual is relative to ||Hf||. A vanishing
// average with a nonvanishing target is a degenerate fit and an error; when
// both vanish the fit is c = 0 with residual 0.
McAverageResult mc_average(const Field& f, const AveragingOptions& options, std::uint64_t seed);

// Same fit over an explicit list of grids (deterministic harness: the
// single-element list with the untranslated r = 1 grid reproduces the
// standard-grid shift exactly).
McAverageResult mc_average_over_grids(const Field& f, const std::vector<ShiftedGrid>& grids,
                                      const std::vector<std::int64_t>& checkpoints = {});

struct HilbertScanReport {
  std::vector<double> test_ratios;  // ||U^{1/2} H V^{-1/2} f|| / ||f|| per test field
  double test_max = 0.0;
  std::vector<double> grid_norms;  // weighted shift norm per sampled grid
  double grid_max = 0.0;
  double grid_min = 0.0;
  double dispersion = 0.0;  // grid_max / grid_min
  double ratio = 0.0;       // test_max / grid_max
};

// Weighted shift norm of one grid: the norm of
//   g |-> U^{1/2} . synthesis( shift( analysis( V^{-1/2} g ) ) )
// from mesh fields to functions piecewise constant on the common refinement
// of the mesh and the grid's intervals; all integrals are exact over that
// refinement. Coefficients are truncated to the grid's level range.
double weighted_shift_norm_on_grid(const MatrixWeight& u, const MatrixWeight& v,
                                   const ShiftedGrid& grid);

// Test-function ratios against the largest per-grid weighted shift norm over
// num_grids sampled grids.
HilbertScanReport weighted_hilbert_scan(const MatrixWeight& u, const MatrixWeight& v,
                                        const std::vector<Field>& test_functions, int num_grids,
                                        int level_min, int level_max, std::uint64_t seed);

}  // namespace matweight
