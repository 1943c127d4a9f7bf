#pragma once

// Batch experiment runner behind the matweight CLI. Parses one JSON config,
// derives every random stream from its single seed, runs the requested
// experiment, and writes the report files into an output directory. The
// command functions are exposed so tests can drive them in-process.

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include <matweight/weights.hpp>

namespace matweight::tools {

// Invalid or unreadable configuration. Parse errors keep the line/column
// reference produced by the JSON parser.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One weight input: either a generator spec or a serialized weight file.
struct WeightSelection {
  std::string file;  // when nonempty, load this file and ignore `spec`
  WeightSpec spec;
};

struct ExperimentConfig {
  std::uint64_t seed = 1;
  int dimension = 1;
  int depth = 3;
  double window_lo = 0.0;
  double window_hi = 1.0;

  WeightSelection u;
  WeightSelection v;

  // conditions
  double rh_budget = 4.0;
  int rh_directions = 64;

  // norms
  int num_sigma = 16;
  int num_bands = 8;
  int band_radius = 2;

  // stopping
  double lambda = 0.0;      // <= 0: use the default threshold
  int max_generations = 0;  // <= 0: run to exhaustion
  int cotlar_max_offset = 3;

  // shift-average
  double avg_window_lo = -4.0;
  double avg_window_hi = 4.0;
  int mesh_depth = 7;
  int level_min = -6;
  int level_max = 6;
  std::int64_t num_samples = 2000;
  bool dilate = true;
  std::vector<std::int64_t> checkpoints;  // empty: only the final count
  int num_grids = 8;
  int num_test_functions = 3;
};

// Parses and validates a config document; throws ConfigError on unknown
// keys, out-of-range values, or malformed JSON.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config_file(const std::string& path);

// Round-trips the normalized config (used to echo it into full_report.json).
std::string config_to_json(const ExperimentConfig& cfg);

// Each command writes its report files under out_dir (created if absent) and
// returns the summary document as serialized JSON. `log` receives one line
// per written file unless quiet.
std::string cmd_gen_weight(const ExperimentConfig& cfg, const std::string& out_dir,
                           std::ostream& log, bool quiet);
std::string cmd_check(const ExperimentConfig& cfg, const std::string& out_dir, std::ostream& log,
                      bool quiet);
std::string cmd_norms(const ExperimentConfig& cfg, const std::string& out_dir, std::ostream& log,
                      bool quiet);
std::string cmd_stopping(const ExperimentConfig& cfg, const std::string& out_dir,
                         std::ostream& log, bool quiet);
std::string cmd_shift_average(const ExperimentConfig& cfg, const std::string& out_dir,
                              std::ostream& log, bool quiet);
std::string cmd_full_report(const ExperimentConfig& cfg, const std::string& out_dir,
                            std::ostream& log, bool quiet);

// Full argv-level entry point (argv[0] excluded). Returns the process exit
// code: 0 success, 1 config/usage error, 2 numerical failure.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace matweight::tools
