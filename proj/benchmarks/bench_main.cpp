#include <benchmark/benchmark.h>

#include <matweight/conditions.hpp>
#include <matweight/hilbert_avg.hpp>
#include <matweight/matops.hpp>
#include <matweight/operators.hpp>
#include <matweight/rng.hpp>
#include <matweight/stopping.hpp>
#include <matweight/weights.hpp>

using namespace matweight;

namespace {

Field random_field(const Grid& grid, int dim, std::uint64_t seed) {
  Rng rng(seed);
  Field f(grid, dim);
  for (double& v : f.values()) v = rng.uniform(-1.0, 1.0);
  return f;
}

MatrixWeight random_weight(const Grid& grid, int dim, std::uint64_t seed) {
  WeightSpec spec;
  spec.kind = WeightKind::random_logbounded;
  spec.cond_max = 8.0;
  return generate_weight(spec, dim, grid, seed);
}

}  // namespace

static void BM_HaarDecompose(benchmark::State& state) {
  const Grid grid(0.0, 1.0, static_cast<int>(state.range(0)));
  const Field f = random_field(grid, 2, 1);
  for (auto _ : state) {
    HaarCoefficients c = haar_decompose(f, grid);
    benchmark::DoNotOptimize(c);
  }
  state.SetComplexityN(grid.num_cells());
}
BENCHMARK(BM_HaarDecompose)->DenseRange(4, 12, 2)->Complexity();

static void BM_HaarRoundTrip(benchmark::State& state) {
  const Grid grid(0.0, 1.0, static_cast<int>(state.range(0)));
  const Field f = random_field(grid, 2, 2);
  for (auto _ : state) {
    Field back = haar_reconstruct(haar_decompose(f, grid), grid);
    benchmark::DoNotOptimize(back);
  }
}
BENCHMARK(BM_HaarRoundTrip)->DenseRange(4, 12, 2);

static void BM_PsdSqrt(benchmark::State& state) {
  const int dim = static_cast<int>(state.range(0));
  const MatrixWeight w = random_weight(Grid(0.0, 1.0, 0), dim, 3);
  const Matrix m = w.average({0, 0});
  for (auto _ : state) {
    Matrix root = psd_sqrt(m);
    benchmark::DoNotOptimize(root);
  }
}
BENCHMARK(BM_PsdSqrt)->DenseRange(2, 8, 2);

static void BM_JointA2(benchmark::State& state) {
  const Grid grid(0.0, 1.0, static_cast<int>(state.range(0)));
  const MatrixWeight u = random_weight(grid, 2, 4);
  const MatrixWeight v = random_weight(grid, 2, 5);
  for (auto _ : state) {
    ConditionReport report = joint_a2(u, v);
    benchmark::DoNotOptimize(report);
  }
}
BENCHMARK(BM_JointA2)->DenseRange(3, 7, 1);

static void BM_SigmaScanExhaustive(benchmark::State& state) {
  const Grid grid(0.0, 1.0, 3);
  const MatrixWeight u = random_weight(grid, 2, 6);
  const MatrixWeight v = random_weight(grid, 2, 7);
  for (auto _ : state) {
    SigmaScanReport report = sigma_norm_scan(u, v, 0, 1);
    benchmark::DoNotOptimize(report);
  }
}
BENCHMARK(BM_SigmaScanExhaustive);

static void BM_SigmaScanSampled(benchmark::State& state) {
  const Grid grid(0.0, 1.0, static_cast<int>(state.range(0)));
  const MatrixWeight u = random_weight(grid, 2, 8);
  const MatrixWeight v = random_weight(grid, 2, 9);
  for (auto _ : state) {
    SigmaScanReport report = sigma_norm_scan(u, v, 8, 1);
    benchmark::DoNotOptimize(report);
  }
}
BENCHMARK(BM_SigmaScanSampled)->DenseRange(4, 6, 1);

static void BM_WeightedShiftNorm(benchmark::State& state) {
  const Grid grid(0.0, 1.0, static_cast<int>(state.range(0)));
  const MatrixWeight u = random_weight(grid, 2, 10);
  const MatrixWeight v = random_weight(grid, 2, 11);
  for (auto _ : state) {
    const double norm =
        weighted_operator_norm([](const HaarCoefficients& c) { return dyadic_shift(c); }, u, v);
    benchmark::DoNotOptimize(norm);
  }
}
BENCHMARK(BM_WeightedShiftNorm)->DenseRange(3, 6, 1);

static void BM_StoppingTree(benchmark::State& state) {
  const Grid grid(0.0, 1.0, static_cast<int>(state.range(0)));
  const MatrixWeight u = random_weight(grid, 2, 12);
  const MatrixWeight v = random_weight(grid, 2, 13);
  const double lambda = default_stopping_lambda(u, v);
  for (auto _ : state) {
    StoppingTree tree = build_stopping_tree(u, v, lambda);
    benchmark::DoNotOptimize(tree);
  }
}
BENCHMARK(BM_StoppingTree)->DenseRange(4, 8, 2);

static void BM_HilbertOnMesh(benchmark::State& state) {
  const Grid mesh(-4.0, 4.0, static_cast<int>(state.range(0)));
  const Field f = random_field(mesh, 1, 14);
  for (auto _ : state) {
    Field h = hilbert_on_mesh(f, mesh);
    benchmark::DoNotOptimize(h);
  }
  state.SetComplexityN(mesh.num_cells());
}
BENCHMARK(BM_HilbertOnMesh)->DenseRange(5, 9, 1)->Complexity();

static void BM_ShiftOnGrid(benchmark::State& state) {
  const Grid mesh(-4.0, 4.0, 7);
  const Field f = random_field(mesh, 1, 15);
  const ShiftedGrid grid = sample_shifted_grid(99, -6, 6, -4.0, 4.0, true);
  for (auto _ : state) {
    Field shifted = shift_on_grid(grid, f);
    benchmark::DoNotOptimize(shifted);
  }
}
BENCHMARK(BM_ShiftOnGrid);

static void BM_McAverage(benchmark::State& state) {
  const Grid mesh(-4.0, 4.0, 7);
  Field f(mesh, 1);
  for (std::int64_t cell = 0; cell < mesh.num_cells(); ++cell) {
    const double mid = mesh.lo() + (static_cast<double>(cell) + 0.5) * mesh.cell_width();
    if (mid >= 0.0 && mid < 0.5) f.at(cell, 0) = mid < 0.25 ? -1.0 : 1.0;
  }
  AveragingOptions options;
  options.num_samples = state.range(0);
  for (auto _ : state) {
    McAverageResult result = mc_average(f, options, 7);
    benchmark::DoNotOptimize(result);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_McAverage)->Arg(100)->Arg(400);

BENCHMARK_MAIN();
