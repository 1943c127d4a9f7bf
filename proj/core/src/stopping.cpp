#include "matweight/stopping.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <sstream>
#include <stdexcept>

#include "matweight/conditions.hpp"
#include "matweight/operators.hpp"

namespace matweight {

namespace {

void require(bool ok, const std::string& message) {
  if (!ok) throw std::invalid_argument(message);
}

// Sandwich matrices of a stopping parent, computed once per parent.
struct ParentFrame {
  Matrix v_half;      // <V^-1>_J^{1/2}
  Matrix v_inv_half;  // <V^-1>_J^{-1/2}
  Matrix u_inv_half;  // <U>_J^{-1/2}
};

ParentFrame make_frame(const MatrixWeight& u, const MatrixWeight& v_inv, DyadicInterval j) {
  Matrix av = v_inv.average(j);
  return {psd_sqrt(av), psd_inv_sqrt(av), psd_inv_sqrt(u.average(j))};
}

ConditionTriple condition_values(const MatrixWeight& u, const MatrixWeight& v_inv,
                                 const ParentFrame& frame, DyadicInterval candidate) {
  ConditionTriple t;
  Matrix au = u.average(candidate);
  Matrix av = v_inv.average(candidate);
  t.joint = spectral_norm(frame.v_half * au * frame.v_half);
  t.v_ratio = spectral_norm(frame.v_inv_half * av * frame.v_inv_half);
  t.u_ratio = spectral_norm(frame.u_inv_half * au * frame.u_inv_half);
  return t;
}

// Maximal descendants (strict, leaves included) violating some condition.
std::vector<DyadicInterval> children_below(const MatrixWeight& u, const MatrixWeight& v_inv,
                                           DyadicInterval parent, double lambda,
                                           std::vector<int>* triggers) {
  const Grid& grid = u.grid();
  ParentFrame frame = make_frame(u, v_inv, parent);
  std::vector<DyadicInterval> out;
  std::deque<DyadicInterval> queue;
  if (parent.level < grid.depth()) {
    queue.push_back(grid.left_child(parent));
    queue.push_back(grid.right_child(parent));
  }
  while (!queue.empty()) {
    DyadicInterval i = queue.front();
    queue.pop_front();
    ConditionTriple t = condition_values(u, v_inv, frame, i);
    const int mask = t.triggered(lambda);
    if (mask != 0) {
      out.push_back(i);
      if (triggers) triggers->push_back(mask);
      continue;  // maximal: nothing below a selected interval
    }
    if (i.level < grid.depth()) {
      queue.push_back(grid.left_child(i));
      queue.push_back(grid.right_child(i));
    }
  }
  // Breadth-first order is level-major already; keep a canonical sort anyway.
  std::vector<std::size_t> order(out.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return out[a] < out[b]; });
  std::vector<DyadicInterval> sorted;
  std::vector<int> sorted_triggers;
  sorted.reserve(out.size());
  for (std::size_t k : order) {
    sorted.push_back(out[k]);
    if (triggers) sorted_triggers.push_back((*triggers)[k]);
  }
  if (triggers) *triggers = std::move(sorted_triggers);
  return sorted;
}

bool inside(DyadicInterval inner, DyadicInterval outer) {
  if (inner.level < outer.level) return false;
  return (inner.index >> (inner.level - outer.level)) == outer.index;
}

}  // namespace

double ConditionTriple::max_value() const {
  return std::max(joint, std::max(v_ratio, u_ratio));
}

int ConditionTriple::triggered(double lambda) const {
  int mask = 0;
  if (joint > lambda) mask |= 1;
  if (v_ratio > lambda) mask |= 2;
  if (u_ratio > lambda) mask |= 4;
  return mask;
}

ConditionTriple stopping_condition_values(const MatrixWeight& u, const MatrixWeight& v,
                                          DyadicInterval parent, DyadicInterval candidate) {
  require(u.grid() == v.grid() && u.dim() == v.dim(),
          "stopping_condition_values: weights live on different spaces");
  require(u.grid().contains(parent) && u.grid().contains(candidate),
          "stopping_condition_values: interval outside grid");
  MatrixWeight v_inv = v.inverse();
  return condition_values(u, v_inv, make_frame(u, v_inv, parent), candidate);
}

std::vector<DyadicInterval> stopping_children(const MatrixWeight& u, const MatrixWeight& v,
                                              DyadicInterval parent, double lambda) {
  require(u.grid() == v.grid() && u.dim() == v.dim(),
          "stopping_children: weights live on different spaces");
  require(u.grid().contains(parent), "stopping_children: parent outside grid");
  require(lambda > 0.0, "stopping_children: lambda must be positive");
  MatrixWeight v_inv = v.inverse();
  return children_below(u, v_inv, parent, lambda, nullptr);
}

StoppingTree build_stopping_tree(const MatrixWeight& u, const MatrixWeight& v, double lambda,
                                 int max_generations) {
  require(u.grid() == v.grid() && u.dim() == v.dim(),
          "build_stopping_tree: weights live on different spaces");
  require(lambda > 0.0, "build_stopping_tree: lambda must be positive");

  MatrixWeight v_inv = v.inverse();
  StoppingTree tree{u.grid(), lambda, {}, {}, false};
  tree.nodes.push_back({u.grid().root(), -1, 0, 0, {}});
  tree.generations.push_back({0});

  std::vector<int> frontier{0};
  int generation = 0;
  while (!frontier.empty()) {
    if (max_generations > 0 && generation >= max_generations) return tree;  // cut short
    std::vector<int> next;
    for (int id : frontier) {
      std::vector<int> triggers;
      std::vector<DyadicInterval> picked =
          children_below(u, v_inv, tree.nodes[static_cast<std::size_t>(id)].interval, lambda,
                         &triggers);
      for (std::size_t k = 0; k < picked.size(); ++k) {
        const int child_id = static_cast<int>(tree.nodes.size());
        tree.nodes.push_back({picked[k], id, generation + 1, triggers[k], {}});
        tree.nodes[static_cast<std::size_t>(id)].children.push_back(child_id);
        next.push_back(child_id);
      }
    }
    if (next.empty()) break;
    tree.generations.push_back(next);
    frontier = std::move(next);
    ++generation;
  }
  tree.exhausted = true;
  return tree;
}

double default_stopping_lambda(const MatrixWeight& u, const MatrixWeight& v) {
  return 6.0 * u.dim() * joint_a2(u, v).constant;
}

std::string DecayReport::to_csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "k,count,measure_fraction\n";
  for (std::size_t k = 0; k < counts.size(); ++k)
    os << (k + 1) << "," << counts[k] << "," << fractions[k] << "\n";
  return os.str();
}

DecayReport decay_report(const StoppingTree& tree) {
  DecayReport report;
  const double window = tree.grid.hi() - tree.grid.lo();
  for (std::size_t g = 1; g < tree.generations.size(); ++g) {
    double measure = 0.0;
    for (int id : tree.generations[g])
      measure += tree.grid.length(tree.nodes[static_cast<std::size_t>(id)].interval.level);
    report.counts.push_back(static_cast<std::int64_t>(tree.generations[g].size()));
    report.fractions.push_back(measure / window);
  }
  for (std::size_t k = 0; k < report.fractions.size(); ++k)
    report.delta_fit = std::max(report.delta_fit,
                                std::pow(report.fractions[k], 1.0 / static_cast<double>(k + 1)));
  return report;
}

std::vector<DyadicInterval> free_family(const StoppingTree& tree, int node) {
  require(node >= 0 && node < static_cast<int>(tree.nodes.size()), "free_family: bad node id");
  const StoppingNode& n = tree.nodes[static_cast<std::size_t>(node)];
  const Grid& grid = tree.grid;

  std::vector<DyadicInterval> blocked;
  for (int child : n.children)
    blocked.push_back(tree.nodes[static_cast<std::size_t>(child)].interval);

  std::vector<DyadicInterval> out;
  std::deque<DyadicInterval> queue{n.interval};
  while (!queue.empty()) {
    DyadicInterval i = queue.front();
    queue.pop_front();
    bool is_blocked = false;
    for (const DyadicInterval& b : blocked)
      if (inside(i, b)) {
        is_blocked = true;
        break;
      }
    if (is_blocked) continue;  // the child's own family takes over from here
    out.push_back(i);
    if (i.level < grid.depth()) {
      queue.push_back(grid.left_child(i));
      queue.push_back(grid.right_child(i));
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

HaarCoefficients free_projection(const StoppingTree& tree, int node, const HaarCoefficients& c) {
  require(c.grid() == tree.grid, "free_projection: coefficients live on a different grid");
  HaarCoefficients out(c.grid(), c.dim());
  for (const DyadicInterval& i : free_family(tree, node)) {
    if (i.level >= tree.grid.depth()) continue;  // leaves carry no coefficient
    const double* src = c.at(i);
    double* dst = out.at(i);
    for (int j = 0; j < c.dim(); ++j) dst[j] = src[j];
  }
  return out;
}

FreeRegionBounds free_region_bounds(const MatrixWeight& u, const MatrixWeight& v,
                                    const StoppingTree& tree, int node) {
  require(u.grid() == tree.grid, "free_region_bounds: weights live on a different grid");
  MatrixWeight v_inv = v.inverse();
  const DyadicInterval parent = tree.nodes[static_cast<std::size_t>(node)].interval;
  ParentFrame frame = make_frame(u, v_inv, parent);
  FreeRegionBounds out;
  for (const DyadicInterval& i : free_family(tree, node)) {
    ConditionTriple t = condition_values(u, v_inv, frame, i);
    out.joint_max = std::max(out.joint_max, t.joint);
    out.v_ratio_max = std::max(out.v_ratio_max, t.v_ratio);
    out.u_ratio_max = std::max(out.u_ratio_max, t.u_ratio);
  }
  return out;
}

namespace {

Field square_term_impl(const MatrixWeight& u, const MatrixWeight& v_inv, const StoppingTree& tree,
                       int node, const HaarCoefficients& c) {
  HaarCoefficients proj = free_projection(tree, node, c);
  for (const DyadicInterval& i : free_family(tree, node)) {
    if (i.level >= tree.grid.depth()) continue;
    Matrix half = psd_sqrt(v_inv.average(i));
    const double* src = proj.at(i);
    Vec x(src, src + c.dim());
    Vec y = half.apply(x);
    double* dst = proj.at(i);
    for (int j = 0; j < c.dim(); ++j) dst[j] = y[static_cast<std::size_t>(j)];
  }
  return pointwise_weight_half(u, 1, haar_reconstruct(proj, tree.grid));
}

}  // namespace

Field square_function_term(const MatrixWeight& u, const MatrixWeight& v,
                           const StoppingTree& tree, int node, const HaarCoefficients& c) {
  require(u.grid() == tree.grid && c.grid() == tree.grid && u.dim() == c.dim(),
          "square_function_term: mismatched spaces");
  MatrixWeight v_inv = v.inverse();
  return square_term_impl(u, v_inv, tree, node, c);
}

Field two_weight_square_function(const MatrixWeight& u, const MatrixWeight& v,
                                 const StoppingTree& tree, const HaarCoefficients& c) {
  require(u.grid() == tree.grid && c.grid() == tree.grid && u.dim() == c.dim(),
          "two_weight_square_function: mismatched spaces");
  MatrixWeight v_inv = v.inverse();
  Field out(tree.grid, 1);
  for (int node = 0; node < static_cast<int>(tree.nodes.size()); ++node) {
    Field term = square_term_impl(u, v_inv, tree, node, c);
    for (std::int64_t cell = 0; cell < out.num_cells(); ++cell) {
      double mass = 0.0;
      for (int j = 0; j < term.dim(); ++j) mass += term.at(cell, j) * term.at(cell, j);
      out.at(cell, 0) += mass;
    }
  }
  for (std::int64_t cell = 0; cell < out.num_cells(); ++cell)
    out.at(cell, 0) = std::sqrt(out.at(cell, 0));
  return out;
}

OffdiagonalEnergy offdiagonal_energy(const MatrixWeight& u, const MatrixWeight& v,
                                     const StoppingTree& tree, int node, int offset,
                                     const HaarCoefficients& c) {
  require(node >= 0 && node < static_cast<int>(tree.nodes.size()),
          "offdiagonal_energy: bad node id");
  require(offset >= 1, "offdiagonal_energy: offset must be at least 1");
  const Grid& grid = tree.grid;
  const StoppingNode& n = tree.nodes[static_cast<std::size_t>(node)];

  MatrixWeight v_inv = v.inverse();
  Field term = square_term_impl(u, v_inv, tree, node, c);

  // Cells under stopping nodes `offset` generations below this node.
  std::vector<char> covered(static_cast<std::size_t>(grid.num_cells()), 0);
  const std::size_t target_gen = static_cast<std::size_t>(n.generation + offset);
  if (target_gen < tree.generations.size()) {
    for (int id : tree.generations[target_gen]) {
      const DyadicInterval i = tree.nodes[static_cast<std::size_t>(id)].interval;
      if (!inside(i, n.interval)) continue;
      for (std::int64_t cell = grid.cells_begin(i); cell < grid.cells_end(i); ++cell)
        covered[static_cast<std::size_t>(cell)] = 1;
    }
  }

  OffdiagonalEnergy out;
  const double w = grid.cell_width();
  for (std::int64_t cell = 0; cell < grid.num_cells(); ++cell) {
    if (!covered[static_cast<std::size_t>(cell)]) continue;
    for (int j = 0; j < term.dim(); ++j) out.energy += term.at(cell, j) * term.at(cell, j) * w;
  }
  out.reference = free_projection(tree, node, c).squared_mass();
  out.ratio = out.reference > 0.0 ? out.energy / out.reference : 0.0;
  return out;
}

}  // namespace matweight
