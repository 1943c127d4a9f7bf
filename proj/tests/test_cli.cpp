// In-process CLI tests: the documented example runs, the report files, exit
// codes, overrides, and byte-identical reruns. Every case works inside its
// own temp directory so parallel test runs never collide.

#include <doctest.h>

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include <matweight_tools/experiments.hpp>

using namespace matweight;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct TempDir {
  fs::path path;

  explicit TempDir(const std::string& tag) {
    static std::atomic<unsigned> counter{0};
    static const unsigned long long stamp = std::random_device{}();
    path = fs::temp_directory_path() /
           ("matweight_cli_" + std::to_string(stamp) + "_" + tag + "_" +
            std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string str() const { return path.string(); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string write_text(const TempDir& dir, const std::string& name, const std::string& text) {
  const std::string full = dir.file(name);
  std::ofstream out(full, std::ios::binary);
  REQUIRE(bool(out));
  out << text;
  return full;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(bool(in));
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

json read_json(const std::string& path) { return json::parse(read_text(path)); }

struct CliResult {
  int code = -1;
  std::string out;
  std::string err;
};

CliResult run(const std::vector<std::string>& args) {
  std::ostringstream out;
  std::ostringstream err;
  CliResult result;
  result.code = tools::run_cli(args, out, err);
  result.out = out.str();
  result.err = err.str();
  return result;
}

// Summary JSON printed after the "wrote ..." progress lines.
json summary_json(const std::string& stdout_text) {
  const std::size_t brace = stdout_text.find('{');
  REQUIRE(brace != std::string::npos);
  return json::parse(stdout_text.substr(brace));
}

const char* kTwoValueNormsConfig = R"({
  "seed": 3,
  "dimension": 1,
  "depth": 1,
  "weights": {
    "U": {"kind": "two_value", "a": 1.0, "b": 4.0},
    "V": {"kind": "two_value", "a": 1.0, "b": 4.0}
  },
  "norms": {"num_sigma": 8, "num_bands": 2, "band_radius": 1}
})";

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("check on identity weights reports unit constants") {
  TempDir dir("check_identity");
  const std::string cfg = write_text(dir, "cfg.json", R"({"seed": 7, "dimension": 2, "depth": 3})");

  const CliResult r = run({"check", "--config", cfg, "--out", dir.str()});
  CHECK(r.code == 0);
  CHECK(r.err.empty());
  CHECK(r.out.find("conditions.json") != std::string::npos);

  const json report = read_json(dir.file("conditions.json"));
  CHECK(report["joint_a2"]["constant"].get<double>() == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(report["a2_zero_U"]["constant"].get<double>() == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(report["a2_zero_Vinv"]["constant"].get<double>() == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(report["reverse_holder_U"]["found"].get<bool>());
  CHECK(report["reverse_holder_U"]["report"]["constant"].get<double>() ==
        doctest::Approx(1.0).epsilon(1e-10));
  CHECK(report["reverse_holder_U"]["report"]["r"].get<double>() == doctest::Approx(8.0));
  CHECK(report["reverse_holder_Vinv"]["found"].get<bool>());

  // the same summary goes to stdout
  const json echoed = summary_json(r.out);
  CHECK(echoed["joint_a2"]["constant"].get<double>() == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("norms on the scalar two_value pair pins the documented numbers") {
  TempDir dir("norms_two_value");
  const std::string cfg = write_text(dir, "cfg.json", kTwoValueNormsConfig);

  const CliResult r = run({"norms", "--config", cfg, "--out", dir.str()});
  REQUIRE(r.code == 0);

  const json norms = read_json(dir.file("norms.json"));
  CHECK(norms["max"].get<double>() == doctest::Approx(1.25).epsilon(1e-9));
  CHECK(norms["min"].get<double>() == doctest::Approx(1.25).epsilon(1e-9));
  CHECK(norms["bound_product"].get<double>() == doctest::Approx(1.25).epsilon(1e-9));
  CHECK(norms["a2"].get<double>() == doctest::Approx(1.5625).epsilon(1e-10));
  CHECK(norms["a2zero_U"].get<double>() == doctest::Approx(1.25).epsilon(1e-10));
  CHECK(norms["a2zero_Vinv"].get<double>() == doctest::Approx(1.25).epsilon(1e-10));
  CHECK(norms["diagonal_product_norm"].get<double>() == doctest::Approx(1.25).epsilon(1e-10));
  CHECK(norms["exhaustive"].get<bool>());
  CHECK(norms["num_sigma_scanned"].get<int>() == 2);

  // both halves constant at depth 1, so the top ladder moment fits the budget
  REQUIRE(norms["rh_r"].is_number());
  CHECK(norms["rh_r"].get<double>() == doctest::Approx(8.0));
  const double rh_expected = std::pow((std::pow(0.4, 4.0) + std::pow(1.6, 4.0)) / 2.0, 0.125);
  CHECK(norms["rh_const"].get<double>() == doctest::Approx(rh_expected).epsilon(1e-9));
  CHECK(norms["rh_const"].get<double>() == doctest::Approx(1.1605).epsilon(1e-3));

  // depth 1 has no interior parent/child pair, so the shift annihilates input
  CHECK(norms["shift_norm"].get<double>() == doctest::Approx(0.0).epsilon(1e-12));

  REQUIRE(norms["bands"].is_array());
  CHECK(norms["bands"].size() == 2);
  for (const json& band : norms["bands"]) CHECK(band["pass"].get<bool>());

  const std::string csv = read_text(dir.file("sigma_norms.csv"));
  CHECK(csv.rfind("sigma_id,norm\n", 0) == 0);
  CHECK(csv.find("sigma_0,") != std::string::npos);
  CHECK(csv.find("sigma_1,") != std::string::npos);
}

TEST_CASE("stopping on the harsh two_value pair reports one half-measure generation") {
  TempDir dir("stopping_two_value");
  const std::string cfg = write_text(dir, "cfg.json", R"({
    "seed": 5,
    "dimension": 1,
    "depth": 6,
    "weights": {
      "U": {"kind": "two_value", "a": 1.0, "b": 100.0},
      "V": {"kind": "two_value", "a": 1.0, "b": 100.0}
    },
    "stopping": {"lambda": 10.0}
  })");

  const CliResult r = run({"stopping", "--config", cfg, "--out", dir.str()});
  REQUIRE(r.code == 0);

  const json report = read_json(dir.file("stopping.json"));
  CHECK(report["lambda"].get<double>() == doctest::Approx(10.0));
  CHECK(report["delta_fit"].get<double>() == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(report["pass"].get<bool>());
  CHECK(report["exhausted"].get<bool>());
  CHECK(report["num_generations"].get<int>() == 1);
  REQUIRE(report["counts"].is_array());
  REQUIRE(report["counts"].size() == 1);
  CHECK(report["counts"][0].get<int>() == 1);
  CHECK(report["fractions"][0].get<double>() == doctest::Approx(0.5).epsilon(1e-12));

  const std::string decay = read_text(dir.file("decay.csv"));
  CHECK(decay == "k,count,measure_fraction\n1,1,0.5\n");

  const std::string cotlar = read_text(dir.file("cotlar.csv"));
  CHECK(cotlar.rfind("j,k,lhs,reference,ratio\n", 0) == 0);
}

TEST_CASE("full-report reruns byte-identically and cross-checks hold") {
  TempDir dir_a("full_a");
  TempDir dir_b("full_b");
  const char* config_text = R"({
    "seed": 11,
    "dimension": 2,
    "depth": 2,
    "weights": {
      "U": {"kind": "random_logbounded", "cond_max": 6.0},
      "V": {"kind": "rotating", "theta0": 0.3, "theta_rate": 1.1, "eccentricity": 3.0}
    },
    "conditions": {"rh_budget": 4.0, "rh_directions": 8},
    "norms": {"num_sigma": 4, "num_bands": 2, "band_radius": 1},
    "stopping": {"lambda": 1.5, "max_generations": 3, "cotlar_max_offset": 2},
    "shift_average": {
      "window": [-4.0, 4.0],
      "mesh_depth": 5,
      "level_min": -3,
      "level_max": 3,
      "num_samples": 60,
      "dilate": true,
      "checkpoints": [20],
      "num_grids": 3,
      "num_test_functions": 3
    }
  })";
  const std::string cfg_a = write_text(dir_a, "cfg.json", config_text);

  const CliResult first = run({"full-report", "--config", cfg_a, "--out", dir_a.str(), "--quiet"});
  REQUIRE(first.code == 0);
  CHECK(first.out.empty());
  const CliResult second = run({"full-report", "--config", cfg_a, "--out", dir_b.str(), "--quiet"});
  REQUIRE(second.code == 0);

  const char* files[] = {"weight_U.json",  "weight_V.json", "conditions.json", "sigma_norms.csv",
                         "norms.json",     "decay.csv",     "cotlar.csv",      "stopping.json",
                         "averaging.csv",  "shift_average.json", "full_report.json"};
  for (const char* name : files) {
    INFO("file ", name);
    REQUIRE(fs::exists(dir_a.path / name));
    REQUIRE(fs::exists(dir_b.path / name));
    CHECK(read_text(dir_a.file(name)) == read_text(dir_b.file(name)));
  }

  const json report = read_json(dir_a.file("full_report.json"));
  CHECK(report["cross_checks"]["diag_squared_equals_a2"].get<bool>());
  CHECK(report["cross_checks"]["max_sigma_le_bound_product"].get<bool>());
  CHECK(report["config"]["seed"].get<int>() == 11);
}

TEST_CASE("config errors exit 1 with a pointed message") {
  TempDir dir("config_errors");

  SUBCASE("missing file") {
    const CliResult r = run({"check", "--config", dir.file("absent.json")});
    CHECK(r.code == 1);
    CHECK(r.err.find("cannot open") != std::string::npos);
  }
  SUBCASE("malformed json keeps the parser's line reference") {
    const std::string cfg = write_text(dir, "bad.json", "{ \"seed\": \n");
    const CliResult r = run({"check", "--config", cfg});
    CHECK(r.code == 1);
    CHECK(r.err.find("parse error at line") != std::string::npos);
  }
  SUBCASE("unknown key") {
    const std::string cfg = write_text(dir, "typo.json", R"({"sead": 1})");
    const CliResult r = run({"check", "--config", cfg});
    CHECK(r.code == 1);
    CHECK(r.err.find("unknown key") != std::string::npos);
    CHECK(r.err.find("sead") != std::string::npos);
  }
  SUBCASE("out-of-range value") {
    const std::string cfg = write_text(dir, "range.json", R"({"depth": 40})");
    const CliResult r = run({"check", "--config", cfg});
    CHECK(r.code == 1);
    CHECK(r.err.find("depth") != std::string::npos);
  }
  SUBCASE("missing required --config flag") {
    const CliResult r = run({"check"});
    CHECK(r.code == 1);
  }
  SUBCASE("unknown subcommand") {
    const CliResult r = run({"frobnicate"});
    CHECK(r.code == 1);
  }
  SUBCASE("depth override out of range") {
    const std::string cfg = write_text(dir, "ok.json", R"({"seed": 1})");
    const CliResult r = run({"check", "--config", cfg, "--depth", "0"});
    CHECK(r.code == 1);
    CHECK(r.err.find("depth") != std::string::npos);
  }
}

TEST_CASE("numerical failures exit 2") {
  TempDir dir("numerical_failure");

  // The config parser only checks that the matrix is square and symmetric
  // numbers parse, so an indefinite constant matrix survives until weight
  // construction inside the command body and surfaces as a numerical failure.
  const char* config_text = R"({
    "seed": 1,
    "dimension": 2,
    "depth": 1,
    "weights": {
      "U": {},
      "V": {"kind": "constant", "matrix": [[1.0, 0.0], [0.0, -1.0]]}
    }
  })";
  const std::string cfg = write_text(dir, "cfg.json", config_text);

  const CliResult r = run({"check", "--config", cfg, "--out", dir.str()});
  CHECK(r.code == 2);
  CHECK(r.err.find("numerical failure") != std::string::npos);
  CHECK(r.err.find("positive definite") != std::string::npos);
}

TEST_CASE("seed and depth overrides take effect") {
  TempDir dir_a("override_a");
  TempDir dir_b("override_b");
  TempDir dir_c("override_c");
  const char* config_text = R"({
    "seed": 9,
    "dimension": 2,
    "depth": 2,
    "weights": {
      "U": {"kind": "random_logbounded", "cond_max": 5.0},
      "V": {"kind": "random_logbounded", "cond_max": 5.0}
    }
  })";
  const std::string cfg = write_text(dir_a, "cfg.json", config_text);

  REQUIRE(run({"gen-weight", "--config", cfg, "--out", dir_a.str(), "--quiet"}).code == 0);
  REQUIRE(run({"gen-weight", "--config", cfg, "--out", dir_b.str(), "--quiet", "--seed", "10"})
              .code == 0);
  REQUIRE(run({"gen-weight", "--config", cfg, "--out", dir_c.str(), "--quiet"}).code == 0);

  const std::string u_a = read_text(dir_a.file("weight_U.json"));
  const std::string u_b = read_text(dir_b.file("weight_U.json"));
  const std::string u_c = read_text(dir_c.file("weight_U.json"));
  CHECK(u_a != u_b);   // new seed, new sample
  CHECK(u_a == u_c);   // same seed, same bytes

  TempDir dir_d("override_d");
  REQUIRE(run({"gen-weight", "--config", cfg, "--out", dir_d.str(), "--quiet", "--depth", "3"})
              .code == 0);
  const json deeper = read_json(dir_d.file("weight_U.json"));
  CHECK(deeper["D"].get<int>() == 3);
  CHECK(deeper["cells"].size() == 8);
  const json original = json::parse(u_a);
  CHECK(original["D"].get<int>() == 2);
  CHECK(original["cells"].size() == 4);
}

TEST_CASE("quiet runs write files but print nothing") {
  TempDir dir("quiet");
  const std::string cfg = write_text(dir, "cfg.json", R"({"seed": 2, "dimension": 1, "depth": 2})");

  const CliResult r = run({"check", "--config", cfg, "--out", dir.str(), "--quiet"});
  CHECK(r.code == 0);
  CHECK(r.out.empty());
  CHECK(r.err.empty());
  CHECK(fs::exists(dir.path / "conditions.json"));
}

TEST_CASE("file-based weights reproduce the inline run byte for byte") {
  TempDir dir_inline("file_inline");
  TempDir dir_gen("file_gen");
  TempDir dir_file("file_file");

  const std::string cfg_inline = write_text(dir_inline, "cfg.json", kTwoValueNormsConfig);
  REQUIRE(run({"check", "--config", cfg_inline, "--out", dir_inline.str(), "--quiet"}).code == 0);
  REQUIRE(run({"gen-weight", "--config", cfg_inline, "--out", dir_gen.str(), "--quiet"}).code == 0);

  json cfg_doc = json::parse(kTwoValueNormsConfig);
  cfg_doc["weights"]["U"] = {{"file", dir_gen.file("weight_U.json")}};
  cfg_doc["weights"]["V"] = {{"file", dir_gen.file("weight_V.json")}};
  const std::string cfg_file = write_text(dir_file, "cfg.json", cfg_doc.dump());
  REQUIRE(run({"check", "--config", cfg_file, "--out", dir_file.str(), "--quiet"}).code == 0);

  CHECK(read_text(dir_inline.file("conditions.json")) ==
        read_text(dir_file.file("conditions.json")));

  // the serialized weights live on a depth-1 mesh; a depth-2 config must refuse
  cfg_doc["depth"] = 2;
  const std::string cfg_clash = write_text(dir_file, "clash.json", cfg_doc.dump());
  const CliResult clash = run({"check", "--config", cfg_clash, "--out", dir_file.str()});
  CHECK(clash.code == 1);
  CHECK(clash.err.find("different mesh") != std::string::npos);

  // same mesh, wrong dimension
  cfg_doc["depth"] = 1;
  cfg_doc["dimension"] = 2;
  const std::string cfg_dim = write_text(dir_file, "dim.json", cfg_doc.dump());
  const CliResult dim = run({"check", "--config", cfg_dim, "--out", dir_file.str()});
  CHECK(dim.code == 1);
  CHECK(dim.err.find("dimension") != std::string::npos);
}

}  // TEST_SUITE
