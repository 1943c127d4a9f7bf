#include "matweight_tools/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include <matweight/conditions.hpp>
#include <matweight/hilbert_avg.hpp>
#include <matweight/operators.hpp>
#include <matweight/rng.hpp>
#include <matweight/stopping.hpp>

namespace matweight::tools {

using nlohmann::json;

namespace {

[[noreturn]] void bad_config(const std::string& message) {
  throw ConfigError("config error: " + message);
}

void check_keys(const json& obj, const std::string& where,
                std::initializer_list<const char*> allowed) {
  for (const auto& item : obj.items()) {
    bool known = false;
    for (const char* key : allowed)
      if (item.key() == key) known = true;
    if (!known) bad_config("unknown key \"" + item.key() + "\" in " + where);
  }
}

double get_number(const json& obj, const char* key, double fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_number()) bad_config(std::string(key) + " must be a number");
  return obj[key].get<double>();
}

std::int64_t get_integer(const json& obj, const char* key, std::int64_t fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_number_integer()) bad_config(std::string(key) + " must be an integer");
  return obj[key].get<std::int64_t>();
}

bool get_bool(const json& obj, const char* key, bool fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_boolean()) bad_config(std::string(key) + " must be a boolean");
  return obj[key].get<bool>();
}

WeightKind parse_kind(const std::string& name) {
  if (name == "constant") return WeightKind::constant;
  if (name == "two_value") return WeightKind::two_value;
  if (name == "scalar_power") return WeightKind::scalar_power;
  if (name == "rotating") return WeightKind::rotating;
  if (name == "random_logbounded") return WeightKind::random_logbounded;
  bad_config("unknown weight kind \"" + name + "\"");
}

WeightSelection parse_weight_selection(const json& obj, const std::string& where) {
  if (!obj.is_object()) bad_config(where + " must be an object");
  check_keys(obj, where,
             {"file", "kind", "matrix", "a", "b", "alpha", "theta0", "theta_rate", "eccentricity",
              "cond_max"});
  WeightSelection sel;
  if (obj.contains("file")) {
    if (!obj["file"].is_string()) bad_config(where + ".file must be a string");
    sel.file = obj["file"].get<std::string>();
    if (sel.file.empty()) bad_config(where + ".file must not be empty");
    return sel;
  }
  std::string kind = obj.contains("kind") ? obj["kind"].get<std::string>() : "constant";
  sel.spec.kind = parse_kind(kind);
  if (obj.contains("matrix")) {
    const json& rows = obj["matrix"];
    if (!rows.is_array() || rows.empty()) bad_config(where + ".matrix must be a nonempty array");
    const std::size_t n = rows.size();
    Matrix m(static_cast<int>(n), static_cast<int>(n));
    for (std::size_t r = 0; r < n; ++r) {
      if (!rows[r].is_array() || rows[r].size() != n)
        bad_config(where + ".matrix must be square");
      for (std::size_t c = 0; c < n; ++c)
        m(static_cast<int>(r), static_cast<int>(c)) = rows[r][c].get<double>();
    }
    sel.spec.constant_matrix = m;
  }
  sel.spec.a = get_number(obj, "a", sel.spec.a);
  sel.spec.b = get_number(obj, "b", sel.spec.b);
  sel.spec.alpha = get_number(obj, "alpha", sel.spec.alpha);
  sel.spec.theta0 = get_number(obj, "theta0", sel.spec.theta0);
  sel.spec.theta_rate = get_number(obj, "theta_rate", sel.spec.theta_rate);
  sel.spec.eccentricity = get_number(obj, "eccentricity", sel.spec.eccentricity);
  sel.spec.cond_max = get_number(obj, "cond_max", sel.spec.cond_max);
  return sel;
}

json weight_selection_to_json(const WeightSelection& sel) {
  json out;
  if (!sel.file.empty()) {
    out["file"] = sel.file;
    return out;
  }
  out["kind"] = weight_kind_name(sel.spec.kind);
  switch (sel.spec.kind) {
    case WeightKind::constant:
      if (sel.spec.constant_matrix.rows() > 0) {
        json rows = json::array();
        for (int r = 0; r < sel.spec.constant_matrix.rows(); ++r) {
          json row = json::array();
          for (int c = 0; c < sel.spec.constant_matrix.cols(); ++c)
            row.push_back(sel.spec.constant_matrix(r, c));
          rows.push_back(row);
        }
        out["matrix"] = rows;
      }
      break;
    case WeightKind::two_value:
      out["a"] = sel.spec.a;
      out["b"] = sel.spec.b;
      break;
    case WeightKind::scalar_power:
      out["alpha"] = sel.spec.alpha;
      break;
    case WeightKind::rotating:
      out["theta0"] = sel.spec.theta0;
      out["theta_rate"] = sel.spec.theta_rate;
      out["eccentricity"] = sel.spec.eccentricity;
      break;
    case WeightKind::random_logbounded:
      out["cond_max"] = sel.spec.cond_max;
      break;
  }
  return out;
}

ExperimentConfig parse_config_json(const json& doc) {
  if (!doc.is_object()) bad_config("top-level document must be an object");
  check_keys(doc, "the top level",
             {"seed", "dimension", "depth", "window", "weights", "conditions", "norms", "stopping",
              "shift_average"});

  ExperimentConfig cfg;
  std::int64_t seed = get_integer(doc, "seed", 1);
  if (seed < 0) bad_config("seed must be nonnegative");
  cfg.seed = static_cast<std::uint64_t>(seed);

  cfg.dimension = static_cast<int>(get_integer(doc, "dimension", cfg.dimension));
  if (cfg.dimension < 1 || cfg.dimension > 8) bad_config("dimension must be in [1, 8]");
  cfg.depth = static_cast<int>(get_integer(doc, "depth", cfg.depth));
  if (cfg.depth < 1 || cfg.depth > 12) bad_config("depth must be in [1, 12]");

  if (doc.contains("window")) {
    const json& w = doc["window"];
    if (!w.is_array() || w.size() != 2) bad_config("window must be [lo, hi]");
    cfg.window_lo = w[0].get<double>();
    cfg.window_hi = w[1].get<double>();
  }
  if (!(cfg.window_lo < cfg.window_hi)) bad_config("window must satisfy lo < hi");

  if (doc.contains("weights")) {
    const json& w = doc["weights"];
    if (!w.is_object()) bad_config("weights must be an object");
    check_keys(w, "weights", {"U", "V"});
    if (w.contains("U")) cfg.u = parse_weight_selection(w["U"], "weights.U");
    if (w.contains("V")) cfg.v = parse_weight_selection(w["V"], "weights.V");
  }

  if (doc.contains("conditions")) {
    const json& c = doc["conditions"];
    check_keys(c, "conditions", {"rh_budget", "rh_directions"});
    cfg.rh_budget = get_number(c, "rh_budget", cfg.rh_budget);
    if (!(cfg.rh_budget > 1.0)) bad_config("conditions.rh_budget must exceed 1");
    cfg.rh_directions = static_cast<int>(get_integer(c, "rh_directions", cfg.rh_directions));
    if (cfg.rh_directions < 0) bad_config("conditions.rh_directions must be nonnegative");
  }

  if (doc.contains("norms")) {
    const json& n = doc["norms"];
    check_keys(n, "norms", {"num_sigma", "num_bands", "band_radius"});
    cfg.num_sigma = static_cast<int>(get_integer(n, "num_sigma", cfg.num_sigma));
    if (cfg.num_sigma < 0) bad_config("norms.num_sigma must be nonnegative");
    cfg.num_bands = static_cast<int>(get_integer(n, "num_bands", cfg.num_bands));
    if (cfg.num_bands < 0) bad_config("norms.num_bands must be nonnegative");
    cfg.band_radius = static_cast<int>(get_integer(n, "band_radius", cfg.band_radius));
    if (cfg.band_radius < 0 || cfg.band_radius > 4)
      bad_config("norms.band_radius must be in [0, 4]");
  }

  if (doc.contains("stopping")) {
    const json& s = doc["stopping"];
    check_keys(s, "stopping", {"lambda", "max_generations", "cotlar_max_offset"});
    cfg.lambda = get_number(s, "lambda", cfg.lambda);
    if (cfg.lambda > 0.0 && !(cfg.lambda > 1.0))
      bad_config("stopping.lambda must exceed 1 (or be 0 for the default)");
    cfg.max_generations =
        static_cast<int>(get_integer(s, "max_generations", cfg.max_generations));
    cfg.cotlar_max_offset =
        static_cast<int>(get_integer(s, "cotlar_max_offset", cfg.cotlar_max_offset));
    if (cfg.cotlar_max_offset < 1) bad_config("stopping.cotlar_max_offset must be at least 1");
  }

  if (doc.contains("shift_average")) {
    const json& a = doc["shift_average"];
    check_keys(a, "shift_average",
               {"window", "mesh_depth", "level_min", "level_max", "num_samples", "dilate",
                "checkpoints", "num_grids", "num_test_functions"});
    if (a.contains("window")) {
      const json& w = a["window"];
      if (!w.is_array() || w.size() != 2) bad_config("shift_average.window must be [lo, hi]");
      cfg.avg_window_lo = w[0].get<double>();
      cfg.avg_window_hi = w[1].get<double>();
    }
    if (!(cfg.avg_window_lo < cfg.avg_window_hi))
      bad_config("shift_average.window must satisfy lo < hi");
    cfg.mesh_depth = static_cast<int>(get_integer(a, "mesh_depth", cfg.mesh_depth));
    if (cfg.mesh_depth < 1 || cfg.mesh_depth > 14)
      bad_config("shift_average.mesh_depth must be in [1, 14]");
    cfg.level_min = static_cast<int>(get_integer(a, "level_min", cfg.level_min));
    cfg.level_max = static_cast<int>(get_integer(a, "level_max", cfg.level_max));
    if (cfg.level_min > cfg.level_max)
      bad_config("shift_average.level_min must not exceed level_max");
    cfg.num_samples = get_integer(a, "num_samples", cfg.num_samples);
    if (cfg.num_samples < 1) bad_config("shift_average.num_samples must be positive");
    cfg.dilate = get_bool(a, "dilate", cfg.dilate);
    if (a.contains("checkpoints")) {
      if (!a["checkpoints"].is_array()) bad_config("shift_average.checkpoints must be an array");
      for (const json& c : a["checkpoints"]) {
        if (!c.is_number_integer() || c.get<std::int64_t>() < 1)
          bad_config("shift_average.checkpoints must hold positive integers");
        cfg.checkpoints.push_back(c.get<std::int64_t>());
      }
    }
    cfg.num_grids = static_cast<int>(get_integer(a, "num_grids", cfg.num_grids));
    if (cfg.num_grids < 1) bad_config("shift_average.num_grids must be positive");
    cfg.num_test_functions =
        static_cast<int>(get_integer(a, "num_test_functions", cfg.num_test_functions));
    if (cfg.num_test_functions < 1 || cfg.num_test_functions > 3)
      bad_config("shift_average.num_test_functions must be in [1, 3]");
  }

  return cfg;
}

// ---------------------------------------------------------------------------
// shared command plumbing
// ---------------------------------------------------------------------------

MatrixWeight resolve_weight(const WeightSelection& sel, const ExperimentConfig& cfg,
                            const Grid& grid, const char* stream) {
  if (!sel.file.empty()) {
    std::ifstream in(sel.file, std::ios::binary);
    if (!in) bad_config("cannot open weight file \"" + sel.file + "\"");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    MatrixWeight w = [&] {
      try {
        return MatrixWeight::from_json(buffer.str());
      } catch (const std::exception& e) {
        bad_config("weight file \"" + sel.file + "\": " + e.what());
      }
    }();
    if (!(w.grid() == grid))
      bad_config("weight file \"" + sel.file + "\" lives on a different mesh than the config");
    if (w.dim() != cfg.dimension)
      bad_config("weight file \"" + sel.file + "\" has dimension " + std::to_string(w.dim()) +
                 ", config wants " + std::to_string(cfg.dimension));
    return w;
  }
  return generate_weight(sel.spec, cfg.dimension, grid, derive_seed(cfg.seed, stream));
}

Grid config_grid(const ExperimentConfig& cfg) {
  return Grid(cfg.window_lo, cfg.window_hi, cfg.depth);
}

void write_file(const std::string& out_dir, const std::string& name, const std::string& text,
                std::ostream& log, bool quiet) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  const fs::path path = fs::path(out_dir) / name;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("short write on " + path.string());
  if (!quiet) log << "wrote " << path.string() << "\n";
}

std::string dump(const json& doc) { return doc.dump(2) + "\n"; }

json report_json(const ConditionReport& report) { return json::parse(report.to_json()); }

// Largest ladder exponent r whose constant max(RH_U(r), RH_Vinv(r)) stays
// within the budget, reported with that joint constant.
std::pair<std::optional<double>, double> joint_rh_search(const MatrixWeight& u,
                                                         const MatrixWeight& v_inv,
                                                         const ExperimentConfig& cfg) {
  const std::vector<double>& ladder = reverse_holder_ladder();
  for (auto it = ladder.rbegin(); it != ladder.rend(); ++it) {
    const double cu =
        reverse_holder(u, *it, cfg.rh_directions, derive_seed(cfg.seed, "rh_U")).constant;
    const double cv =
        reverse_holder(v_inv, *it, cfg.rh_directions, derive_seed(cfg.seed, "rh_Vinv")).constant;
    const double c = std::max(cu, cv);
    if (c <= cfg.rh_budget) return {*it, c};
  }
  return {std::nullopt, 0.0};
}

// Test profiles for the averaging experiments, in a fixed order. Values are
// exact on any mesh whose endpoints hit the profile breakpoints.
struct TestProfile {
  const char* name;
  double breakpoints[4];  // profile is constant between consecutive entries
  double values[3];
};

const TestProfile kProfiles[3] = {
    // Haar function of [0, 1/2): height sqrt(2), minus on the left half.
    {"haar_half", {0.0, 0.25, 0.5, 0.5}, {-std::numbers::sqrt2, std::numbers::sqrt2, 0.0}},
    // Haar function of [0, 1): height 1.
    {"haar_unit", {0.0, 0.5, 1.0, 1.0}, {-1.0, 1.0, 0.0}},
    // Step pair: +1 on [0, 1/4), -1 on [1/4, 1/2).
    {"step_pair", {0.0, 0.25, 0.5, 0.5}, {1.0, -1.0, 0.0}},
};

double profile_value(const TestProfile& p, double x) {
  for (int piece = 0; piece < 3; ++piece) {
    if (p.breakpoints[piece] >= p.breakpoints[piece + 1]) break;
    if (x >= p.breakpoints[piece] && x < p.breakpoints[piece + 1]) return p.values[piece];
  }
  return 0.0;
}

void require_aligned(const Grid& mesh, const TestProfile& p) {
  const double w = mesh.cell_width();
  for (double b : p.breakpoints) {
    if (b <= mesh.lo() || b >= mesh.hi()) continue;
    const double steps = (b - mesh.lo()) / w;
    if (std::abs(steps - std::round(steps)) > 1e-9)
      bad_config(std::string("mesh does not resolve the breakpoints of test profile ") + p.name +
                 "; deepen shift_average.mesh_depth");
  }
}

// Scalar profile placed into one vector component of a mesh field.
Field profile_field(const Grid& mesh, int dim, const TestProfile& p, int component) {
  require_aligned(mesh, p);
  Field f(mesh, dim);
  for (std::int64_t cell = 0; cell < mesh.num_cells(); ++cell) {
    const double mid = mesh.lo() + (static_cast<double>(cell) + 0.5) * mesh.cell_width();
    f.at(cell, component) = profile_value(p, mid);
  }
  return f;
}

std::string csv_number(double x) {
  char buffer[40];
  std::snprintf(buffer, sizeof(buffer), "%.17g", x);
  return buffer;
}

BandSpec random_band(const Grid& grid, int radius, Rng& rng) {
  std::vector<DyadicInterval> slots;
  for (int level = 0; level < grid.depth(); ++level)
    for (std::int64_t index = 0; index < grid.num_intervals(level); ++index)
      slots.push_back({level, index});

  std::vector<BandEntry> entries;
  for (DyadicInterval target : slots)
    for (DyadicInterval source : slots) {
      if (tree_distance(grid, source, target) > radius) continue;
      if (rng.uniform01() < 0.35) entries.push_back({source, target, rng.uniform(-1.0, 1.0)});
    }
  if (entries.empty()) entries.push_back({{0, 0}, {0, 0}, 1.0});
  return BandSpec(grid, radius, entries);
}

json checkpoint_json(const AveragingReport& report) {
  json rows = json::array();
  for (const AveragingCheckpoint& c : report.checkpoints)
    rows.push_back(
        {{"sample_count", c.sample_count}, {"fitted_c", c.fitted_c}, {"residual", c.residual}});
  return rows;
}

// ---------------------------------------------------------------------------
// command bodies (json-level, shared by the string wrappers and full-report)
// ---------------------------------------------------------------------------

json gen_weight_body(const ExperimentConfig& cfg, const std::string& out_dir, std::ostream& log,
                     bool quiet) {
  const Grid grid = config_grid(cfg);
  const MatrixWeight u = resolve_weight(cfg.u, cfg, grid, "weight_U");
  const MatrixWeight v = resolve_weight(cfg.v, cfg, grid, "weight_V");
  write_file(out_dir, "weight_U.json", u.to_json(), log, quiet);
  write_file(out_dir, "weight_V.json", v.to_json(), log, quiet);
  json out;
  out["files"] = {"weight_U.json", "weight_V.json"};
  out["dimension"] = cfg.dimension;
  out["depth"] = cfg.depth;
  return out;
}

json check_body(const ExperimentConfig& cfg, const std::string& out_dir, std::ostream& log,
                bool quiet) {
  const Grid grid = config_grid(cfg);
  const MatrixWeight u = resolve_weight(cfg.u, cfg, grid, "weight_U");
  const MatrixWeight v = resolve_weight(cfg.v, cfg, grid, "weight_V");
  const MatrixWeight v_inv = v.inverse();

  json out;
  out["joint_a2"] = report_json(joint_a2(u, v));
  out["a2_zero_U"] = report_json(a2_zero(u));
  out["a2_zero_Vinv"] = report_json(a2_zero(v_inv));

  auto [ru, report_u] =
      rh_exponent_search(u, cfg.rh_budget, cfg.rh_directions, derive_seed(cfg.seed, "rh_U"));
  auto [rv, report_v] =
      rh_exponent_search(v_inv, cfg.rh_budget, cfg.rh_directions, derive_seed(cfg.seed, "rh_Vinv"));
  out["reverse_holder_U"] = {{"found", ru.has_value()}, {"report", report_json(report_u)}};
  out["reverse_holder_Vinv"] = {{"found", rv.has_value()}, {"report", report_json(report_v)}};
  out["rh_budget"] = cfg.rh_budget;

  write_file(out_dir, "conditions.json", dump(out), log, quiet);
  return out;
}

json norms_body(const ExperimentConfig& cfg, const std::string& out_dir, std::ostream& log,
                bool quiet) {
  const Grid grid = config_grid(cfg);
  const MatrixWeight u = resolve_weight(cfg.u, cfg, grid, "weight_U");
  const MatrixWeight v = resolve_weight(cfg.v, cfg, grid, "weight_V");
  const MatrixWeight v_inv = v.inverse();

  const SigmaScanReport scan = sigma_norm_scan(u, v, cfg.num_sigma, cfg.seed);
  std::string csv = "sigma_id,norm\n";
  for (const SigmaScanEntry& e : scan.entries) csv += e.id + "," + csv_number(e.norm) + "\n";
  write_file(out_dir, "sigma_norms.csv", csv, log, quiet);

  const FactorizationBound fac = factorization_bound(u, v);
  const double a2 = joint_a2(u, v).constant;
  auto [rh_r, rh_const] = joint_rh_search(u, v_inv, cfg);

  json out;
  out["max"] = scan.max_norm;
  out["min"] = scan.min_norm;
  out["bound_product"] = fac.product;
  out["a2"] = a2;
  out["a2zero_U"] = a2_zero(u).constant;
  out["a2zero_Vinv"] = a2_zero(v_inv).constant;
  out["rh_r"] = rh_r ? json(*rh_r) : json(nullptr);
  out["rh_const"] = rh_r ? json(rh_const) : json(nullptr);
  out["embedding_factor"] = fac.embedding_factor;
  out["square_factor"] = fac.square_factor;
  out["diagonal_product_norm"] = diagonal_product_norm(u, v);
  out["shift_norm"] =
      weighted_operator_norm([](const HaarCoefficients& c) { return dyadic_shift(c); }, u, v);
  out["exhaustive"] = scan.exhaustive;
  out["num_sigma_scanned"] = static_cast<std::int64_t>(scan.entries.size());

  json bands = json::array();
  Rng rng(derive_seed(cfg.seed, "bands"));
  for (int b = 0; b < cfg.num_bands; ++b) {
    const int radius = static_cast<int>(rng.integer(cfg.band_radius + 1));
    const BandSpec band = random_band(grid, radius, rng);
    const BandBoundReport report = band_domination_report(u, v, band);
    bands.push_back({{"radius", radius},
                     {"entries", static_cast<std::int64_t>(band.entries().size())},
                     {"weighted_norm", report.weighted_norm},
                     {"bound", report.bound},
                     {"phi_sup", report.phi_sup_value},
                     {"unweighted_norm", report.unweighted_norm},
                     {"pass", report.pass}});
  }
  out["bands"] = bands;

  write_file(out_dir, "norms.json", dump(out), log, quiet);
  return out;
}

json stopping_body(const ExperimentConfig& cfg, const std::string& out_dir, std::ostream& log,
                   bool quiet) {
  const Grid grid = config_grid(cfg);
  const MatrixWeight u = resolve_weight(cfg.u, cfg, grid, "weight_U");
  const MatrixWeight v = resolve_weight(cfg.v, cfg, grid, "weight_V");

  const double lambda = cfg.lambda > 0.0 ? cfg.lambda : default_stopping_lambda(u, v);
  const StoppingTree tree = build_stopping_tree(u, v, lambda, cfg.max_generations);
  const DecayReport decay = decay_report(tree);
  write_file(out_dir, "decay.csv", decay.to_csv(), log, quiet);

  // pass: fractions nonincreasing and geometrically dominated by the first.
  bool pass = true;
  for (std::size_t k = 1; k < decay.fractions.size(); ++k)
    if (decay.fractions[k] > decay.fractions[k - 1] + 1e-12) pass = false;
  const double m1 = decay.fractions.empty() ? 0.0 : decay.fractions[0];
  for (std::size_t k = 0; k < decay.fractions.size(); ++k) {
    const double cap = std::pow(m1, static_cast<double>(k + 1)) * (1.0 + 1e-9);
    if (decay.fractions[k] > cap) pass = false;
  }

  json out;
  out["lambda"] = lambda;
  out["delta_fit"] = decay.delta_fit;
  out["pass"] = pass;
  out["num_nodes"] = static_cast<std::int64_t>(tree.nodes.size());
  out["num_generations"] = static_cast<std::int64_t>(tree.generations.size()) - 1;
  out["exhausted"] = tree.exhausted;
  out["counts"] = decay.counts;
  out["fractions"] = decay.fractions;

  // Off-diagonal energy table against a seeded mean-zero coefficient input:
  // row (j, k) integrates the generation-j square-function piece over the
  // union of generation-(k-1) stopping intervals. Generations are reported
  // 1-based: j = 1 is the root's free family.
  HaarCoefficients f(grid, cfg.dimension);
  Rng rng(derive_seed(cfg.seed, "cotlar"));
  for (int level = 0; level < grid.depth(); ++level)
    for (std::int64_t index = 0; index < grid.num_intervals(level); ++index) {
      double* slot = f.at({level, index});
      for (int c = 0; c < cfg.dimension; ++c) slot[c] = rng.uniform(-1.0, 1.0);
    }

  std::string csv = "j,k,lhs,reference,ratio\n";
  const int last_gen = static_cast<int>(tree.generations.size()) - 1;
  for (int j = 1; j + 1 <= last_gen + 1; ++j) {
    for (int k = j + 1; k <= j + cfg.cotlar_max_offset && k - 1 <= last_gen; ++k) {
      double lhs = 0.0;
      double reference = 0.0;
      for (int id : tree.generations[static_cast<std::size_t>(j - 1)]) {
        const OffdiagonalEnergy e = offdiagonal_energy(u, v, tree, id, k - j, f);
        lhs += e.energy;
        reference += e.reference;
      }
      const double ratio = reference > 0.0 ? lhs / reference : 0.0;
      csv += std::to_string(j) + "," + std::to_string(k) + "," + csv_number(lhs) + "," +
             csv_number(reference) + "," + csv_number(ratio) + "\n";
    }
  }
  write_file(out_dir, "cotlar.csv", csv, log, quiet);

  return out;
}

json shift_average_body(const ExperimentConfig& cfg, const std::string& out_dir, std::ostream& log,
                        bool quiet) {
  const Grid mesh(cfg.avg_window_lo, cfg.avg_window_hi, cfg.mesh_depth);

  AveragingOptions options;
  options.level_min = cfg.level_min;
  options.level_max = cfg.level_max;
  options.num_samples = cfg.num_samples;
  options.dilate = cfg.dilate;
  options.checkpoints = cfg.checkpoints;

  json out;
  out["window"] = {cfg.avg_window_lo, cfg.avg_window_hi};
  out["mesh_depth"] = cfg.mesh_depth;
  out["num_samples"] = cfg.num_samples;

  json functions = json::array();
  std::string csv;
  for (int i = 0; i < cfg.num_test_functions; ++i) {
    const Field f = profile_field(mesh, 1, kProfiles[i], 0);
    const McAverageResult result = mc_average(f, options, cfg.seed);
    if (csv.empty()) csv = result.report.to_csv();
    functions.push_back({{"name", kProfiles[i].name},
                         {"samples", result.report.samples},
                         {"fitted_c", result.report.fitted_c},
                         {"residual", result.report.residual},
                         {"checkpoints", checkpoint_json(result.report)}});
  }
  out["functions"] = functions;
  write_file(out_dir, "averaging.csv", csv, log, quiet);

  // Weighted scan: the config's weight specs realized on the averaging mesh.
  const MatrixWeight u = resolve_weight(cfg.u, cfg, mesh, "scan_weight_U");
  const MatrixWeight v = resolve_weight(cfg.v, cfg, mesh, "scan_weight_V");
  std::vector<Field> tests;
  for (int i = 0; i < cfg.num_test_functions; ++i)
    tests.push_back(profile_field(mesh, cfg.dimension, kProfiles[i], i % cfg.dimension));
  const HilbertScanReport scan =
      weighted_hilbert_scan(u, v, tests, cfg.num_grids, cfg.level_min, cfg.level_max, cfg.seed);

  out["scan"] = {{"test_ratios", scan.test_ratios}, {"test_max", scan.test_max},
                 {"grid_norms", scan.grid_norms},   {"grid_max", scan.grid_max},
                 {"grid_min", scan.grid_min},       {"dispersion", scan.dispersion},
                 {"ratio", scan.ratio}};

  write_file(out_dir, "shift_average.json", dump(out), log, quiet);
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// public entry points
// ---------------------------------------------------------------------------

ExperimentConfig parse_config(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config error: ") + e.what());
  }
  return parse_config_json(doc);
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config error: cannot open \"" + path + "\"");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

std::string config_to_json(const ExperimentConfig& cfg) {
  json doc;
  doc["seed"] = cfg.seed;
  doc["dimension"] = cfg.dimension;
  doc["depth"] = cfg.depth;
  doc["window"] = {cfg.window_lo, cfg.window_hi};
  doc["weights"] = {{"U", weight_selection_to_json(cfg.u)},
                    {"V", weight_selection_to_json(cfg.v)}};
  doc["conditions"] = {{"rh_budget", cfg.rh_budget}, {"rh_directions", cfg.rh_directions}};
  doc["norms"] = {{"num_sigma", cfg.num_sigma},
                  {"num_bands", cfg.num_bands},
                  {"band_radius", cfg.band_radius}};
  doc["stopping"] = {{"lambda", cfg.lambda},
                     {"max_generations", cfg.max_generations},
                     {"cotlar_max_offset", cfg.cotlar_max_offset}};
  doc["shift_average"] = {{"window", {cfg.avg_window_lo, cfg.avg_window_hi}},
                          {"mesh_depth", cfg.mesh_depth},
                          {"level_min", cfg.level_min},
                          {"level_max", cfg.level_max},
                          {"num_samples", cfg.num_samples},
                          {"dilate", cfg.dilate},
                          {"checkpoints", cfg.checkpoints},
                          {"num_grids", cfg.num_grids},
                          {"num_test_functions", cfg.num_test_functions}};
  return dump(doc);
}

std::string cmd_gen_weight(const ExperimentConfig& cfg, const std::string& out_dir,
                           std::ostream& log, bool quiet) {
  return dump(gen_weight_body(cfg, out_dir, log, quiet));
}

std::string cmd_check(const ExperimentConfig& cfg, const std::string& out_dir, std::ostream& log,
                      bool quiet) {
  return dump(check_body(cfg, out_dir, log, quiet));
}

std::string cmd_norms(const ExperimentConfig& cfg, const std::string& out_dir, std::ostream& log,
                      bool quiet) {
  return dump(norms_body(cfg, out_dir, log, quiet));
}

std::string cmd_stopping(const ExperimentConfig& cfg, const std::string& out_dir,
                         std::ostream& log, bool quiet) {
  json out = stopping_body(cfg, out_dir, log, quiet);
  write_file(out_dir, "stopping.json", dump(out), log, quiet);
  return dump(out);
}

std::string cmd_shift_average(const ExperimentConfig& cfg, const std::string& out_dir,
                              std::ostream& log, bool quiet) {
  return dump(shift_average_body(cfg, out_dir, log, quiet));
}

std::string cmd_full_report(const ExperimentConfig& cfg, const std::string& out_dir,
                            std::ostream& log, bool quiet) {
  json report;
  report["config"] = json::parse(config_to_json(cfg));
  report["gen_weight"] = gen_weight_body(cfg, out_dir, log, quiet);
  report["conditions"] = check_body(cfg, out_dir, log, quiet);
  json norms = norms_body(cfg, out_dir, log, quiet);
  report["norms"] = norms;
  json stopping = stopping_body(cfg, out_dir, log, quiet);
  write_file(out_dir, "stopping.json", dump(stopping), log, quiet);
  report["stopping"] = stopping;
  report["shift_average"] = shift_average_body(cfg, out_dir, log, quiet);

  const double diag = norms["diagonal_product_norm"].get<double>();
  const double a2 = norms["a2"].get<double>();
  const double max_sigma = norms["max"].get<double>();
  const double bound = norms["bound_product"].get<double>();
  report["cross_checks"] = {
      {"diag_squared", diag * diag},
      {"joint_a2", a2},
      {"diag_squared_equals_a2", std::abs(diag * diag - a2) <= 1e-10 * std::max(1.0, a2)},
      {"max_sigma_norm", max_sigma},
      {"bound_product", bound},
      {"max_sigma_le_bound_product", max_sigma <= bound + 1e-8}};

  write_file(out_dir, "full_report.json", dump(report), log, quiet);
  return dump(report);
}

// ---------------------------------------------------------------------------
// CLI front end
// ---------------------------------------------------------------------------

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"dyadic matrix-weight experiments"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = ".";
  std::int64_t seed_override = -1;
  int depth_override = -1;
  bool quiet = false;

  const char* names[] = {"gen-weight", "check", "norms", "stopping", "shift-average",
                         "full-report"};
  const char* blurbs[] = {"generate and serialize the weight pair",
                          "weight condition constants and witnesses",
                          "sign-pattern norm scan with the factorization bound",
                          "stopping tree, decay report, off-diagonal energies",
                          "shift averaging against the exact kernel, weighted grid scan",
                          "run everything and emit one combined document"};
  for (int i = 0; i < 6; ++i) {
    CLI::App* sub = app.add_subcommand(names[i], blurbs[i]);
    sub->add_option("--config", config_path, "experiment config (JSON)")->required();
    sub->add_option("--out", out_dir, "output directory (default: current)");
    sub->add_option("--seed", seed_override, "override the config seed");
    sub->add_option("--depth", depth_override, "override the config depth");
    sub->add_flag("--quiet", quiet, "suppress progress lines");
  }

  std::vector<const char*> argv;
  argv.push_back("matweight");
  for (const std::string& a : args) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return 1;
  }

  try {
    ExperimentConfig cfg = load_config_file(config_path);
    if (seed_override >= 0) cfg.seed = static_cast<std::uint64_t>(seed_override);
    if (depth_override >= 0) {
      if (depth_override < 1 || depth_override > 12) bad_config("depth must be in [1, 12]");
      cfg.depth = depth_override;
    }

    const std::string command = app.get_subcommands().front()->get_name();
    std::string summary;
    if (command == "gen-weight") summary = cmd_gen_weight(cfg, out_dir, out, quiet);
    if (command == "check") summary = cmd_check(cfg, out_dir, out, quiet);
    if (command == "norms") summary = cmd_norms(cfg, out_dir, out, quiet);
    if (command == "stopping") summary = cmd_stopping(cfg, out_dir, out, quiet);
    if (command == "shift-average") summary = cmd_shift_average(cfg, out_dir, out, quiet);
    if (command == "full-report") summary = cmd_full_report(cfg, out_dir, out, quiet);
    if (!quiet) out << summary;
    return 0;
  } catch (const ConfigError& e) {
    err << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "numerical failure: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace matweight::tools
