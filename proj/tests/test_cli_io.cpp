#include <doctest.h>

#include "twig/classify.hpp"
#include "twig/registry.hpp"
#include "twig/report_io.hpp"
#include "twig/sweep.hpp"

#include <nlohmann/json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <sys/wait.h>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch_dir() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "twig_cli_io_tests";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE_MESSAGE(in.good(), "cannot open ", p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

// Runs the installed CLI binary; returns its exit code, captures streams.
int run_cli(const std::string& args, std::string* out = nullptr, std::string* err = nullptr) {
  const fs::path out_path = scratch_dir() / "stdout.txt";
  const fs::path err_path = scratch_dir() / "stderr.txt";
  const std::string cmd = std::string(TWIG_CLI_PATH) + " " + args + " > " + out_path.string() +
                          " 2> " + err_path.string();
  const int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  if (out) *out = slurp(out_path);
  if (err) *err = slurp(err_path);
  REQUIRE(WIFEXITED(status));
  return WEXITSTATUS(status);
}

twig::TwigSweep small_sweep(twig::TwigReport& report) {
  const auto model = twig::build_model("toy_exponential", 0);
  twig::SweepOptions opt;
  opt.horizons = twig::geometric_grid(1e-2, 1e2, 10);
  opt.n_samples = 20;
  twig::TwigSweep sweep = twig::run_sweep(model, model.default_params(), opt);
  report = twig::classify(model, sweep);
  return sweep;
}

}  // namespace

TEST_CASE("config parsing applies defaults and rejects malformed documents") {
  const auto minimal = twig::parse_run_config(json::parse(R"({"model":"toy_exponential"})"));
  CHECK(minimal.model_name == "toy_exponential");
  CHECK(minimal.order == -1);
  CHECK(minimal.t_min == doctest::Approx(1e-2));
  CHECK(minimal.t_max == doctest::Approx(1e3));
  CHECK(minimal.count == 60);
  CHECK(minimal.n_samples == 50);
  CHECK_FALSE(minimal.recenter);
  CHECK(minimal.output_dir == "twig_out");

  const auto full = twig::parse_run_config(json::parse(R"({
    "model": "pitchfork_super", "order": 2,
    "params": {"r": 0.25, "y0": 0.5},
    "sweep": {"t_min": 0.1, "t_max": 100.0, "count": 24},
    "n_samples": 30, "recenter": true,
    "near_bifurcation": {"param": "r", "offsets": [0.01, -0.01]},
    "classification": {"tail_fraction": 0.5, "slope_tol": 0.3},
    "outputs": "out_dir", "seed": 7})"));
  CHECK(full.order == 2);
  CHECK(full.param_overrides.at("r") == doctest::Approx(0.25));
  CHECK(full.count == 24);
  CHECK(full.recenter);
  REQUIRE(full.near_bifurcation_param.has_value());
  CHECK(*full.near_bifurcation_param == "r");
  CHECK(full.near_bifurcation_offsets.size() == 2);
  CHECK(full.classification.tail_fraction == doctest::Approx(0.5));
  CHECK(full.seed == 7);

  const auto custom = twig::parse_run_config(json::parse(
      R"({"model": {"name": "lin", "state_dim": 1, "params": [{"name": "r"}], "equations": [[]]}})"));
  CHECK(custom.model_name.empty());
  CHECK(custom.custom_model.has_value());

  const auto bad = {
      R"({})",                                                    // no model
      R"({"model": 5})",                                          // wrong type
      R"({"model": "x", "bogus_key": 1})",                        // unknown key
      R"({"model": "x", "sweep": {"t_min": 1, "bogus": 2}})",     // unknown nested key
      R"({"model": "x", "sweep": {"t_min": 0}})",                 // t_min <= 0
      R"({"model": "x", "sweep": {"t_min": 10, "t_max": 1}})",    // inverted range
      R"({"model": "x", "sweep": {"count": 4}})",                 // too few horizons
      R"({"model": "x", "n_samples": 2})",                        // too few samples
      R"({"model": "x", "classification": {"tail_fraction": 0}})",
      R"({"model": "x", "classification": {"slope_tol": -1}})",
      R"({"model": "x", "outputs": ""})",
      R"({"model": "x", "near_bifurcation": {"offsets": [1]}})",  // missing param
  };
  for (const char* doc : bad)
    CHECK_THROWS_AS(twig::parse_run_config(json::parse(doc)), std::invalid_argument);
}

TEST_CASE("17 significant digits survive a text round trip") {
  const double values[] = {0.0,     1.0,        1.0 / 3.0, 1e-300, 6.02214076e23,
                           -3.14159265358979323846, 2.2250738585072014e-308};
  for (double v : values) {
    const std::string s = twig::format_g17(v);
    CHECK(std::strtod(s.c_str(), nullptr) == v);
  }
}

TEST_CASE("CSV artifacts are well formed") {
  twig::TwigReport report;
  const twig::TwigSweep sweep = small_sweep(report);
  const int H = static_cast<int>(sweep.horizons.size());
  const int m = static_cast<int>(sweep.param_names.size());

  const fs::path eig = scratch_dir() / "eigenvalues.csv";
  const fs::path part = scratch_dir() / "participation.csv";
  twig::write_eigenvalues_csv(eig.string(), sweep, report);
  twig::write_participation_csv(part.string(), sweep);

  std::ifstream ein(eig);
  std::string line;
  REQUIRE(std::getline(ein, line));
  CHECK(line == "t_max,direction_index,lambda,slope");
  int rows = 0;
  while (std::getline(ein, line)) {
    ++rows;
    CHECK(std::count(line.begin(), line.end(), ',') == 3);
  }
  CHECK(rows == H * m);

  std::ifstream pin(part);
  REQUIRE(std::getline(pin, line));
  CHECK(line == "t_max,direction_index,param_name,p");
  std::map<std::string, double> sums;  // "t_max|direction" -> sum of p
  rows = 0;
  while (std::getline(pin, line)) {
    ++rows;
    std::istringstream ss(line);
    std::string t, k, name, p;
    REQUIRE(std::getline(ss, t, ','));
    REQUIRE(std::getline(ss, k, ','));
    REQUIRE(std::getline(ss, name, ','));
    REQUIRE(std::getline(ss, p, ','));
    sums[t + "|" + k] += std::strtod(p.c_str(), nullptr);
  }
  CHECK(rows == H * m * m);
  CHECK(static_cast<int>(sums.size()) == H * m);
  for (const auto& [key, sum] : sums) {
    INFO("group ", key);
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("report document round-trips through its own text form") {
  twig::TwigReport report;
  const twig::TwigSweep sweep = small_sweep(report);
  const auto model = twig::build_model("toy_exponential", 0);
  twig::RunConfig config;
  config.model_name = "toy_exponential";
  config.t_max = 1e2;
  config.count = 10;
  config.n_samples = 20;

  const auto doc = twig::report_to_json(config, model, sweep.theta, &sweep, &report, nullptr, {});
  const std::string text = doc.dump(2);
  const auto reparsed = nlohmann::ordered_json::parse(text);
  CHECK(reparsed.dump(2) == text);
  CHECK(doc.at("codimension").get<int>() == report.codimension);
  CHECK(doc.at("errors").empty());
}

TEST_CASE("analyze command produces a deterministic artifact set") {
  const fs::path dir_a = scratch_dir() / "run_a";
  const fs::path dir_b = scratch_dir() / "run_b";
  const fs::path cfg_a = scratch_dir() / "toy_a.json";
  const fs::path cfg_b = scratch_dir() / "toy_b.json";
  const auto make_cfg = [](const fs::path& out_dir) {
    json doc = {{"model", "toy_exponential"},
                {"sweep", {{"t_min", 1e-2}, {"t_max", 1e2}, {"count", 10}}},
                {"n_samples", 20},
                {"outputs", out_dir.string()}};
    return doc.dump(2);
  };
  spit(cfg_a, make_cfg(dir_a));
  spit(cfg_b, make_cfg(dir_b));

  std::string out;
  CHECK(run_cli("analyze --config " + cfg_a.string(), &out) == 0);
  CHECK(out.find("codimension") != std::string::npos);
  for (const char* name : {"report.json", "eigenvalues.csv", "participation.csv", "rainbow.svg"})
    CHECK_MESSAGE(fs::exists(dir_a / name), name);
  CHECK_FALSE(fs::exists(dir_a / "trajectories.csv"));

  CHECK(run_cli("analyze --config " + cfg_b.string()) == 0);
  for (const char* name : {"report.json", "eigenvalues.csv", "participation.csv"})
    CHECK_MESSAGE(slurp(dir_a / name) == slurp(dir_b / name), name);
  const auto ra = json::parse(slurp(dir_a / "report.json"));
  CHECK(ra.at("errors").empty());
  CHECK(ra.at("codimension").is_number_integer());

  SUBCASE("trajectory dump is opt-in") {
    CHECK(run_cli("analyze --dump-trajectories --config " + cfg_a.string()) == 0);
    REQUIRE(fs::exists(dir_a / "trajectories.csv"));
    std::ifstream in(dir_a / "trajectories.csv");
    std::string header;
    REQUIRE(std::getline(in, header));
    CHECK(header == "t,y1");
  }
}

TEST_CASE("analyze command rejects unusable configurations") {
  const fs::path cfg = scratch_dir() / "bad_model.json";
  spit(cfg, R"({"model": "no_such_model"})");
  std::string err;
  CHECK(run_cli("analyze --config " + cfg.string(), nullptr, &err) == 1);
  CHECK(err.find("unknown model") != std::string::npos);

  const fs::path missing = scratch_dir() / "not_there.json";
  CHECK(run_cli("analyze --config " + missing.string(), nullptr, &err) == 1);

  const fs::path badparam = scratch_dir() / "bad_param.json";
  spit(badparam, R"({"model": "saddle_node", "params": {"nope": 1.0}})");
  CHECK(run_cli("analyze --config " + badparam.string(), nullptr, &err) == 1);
  CHECK(err.find("nope") != std::string::npos);
}

TEST_CASE("analyze accepts an inline custom model") {
  const fs::path dir = scratch_dir() / "custom_out";
  const fs::path cfg = scratch_dir() / "custom.json";
  const json model = {
      {"name", "linear_decay"},
      {"description", "dy/dt = r y"},
      {"state_dim", 1},
      {"params",
       {{{"name", "r"}, {"value", -0.5}},
        {{"name", "y0"}, {"value", 1.0}, {"kind", "initial_condition"}, {"state_index", 0}}}},
      {"equations", {{{{"coeff", {{"param", "r"}}}, {"powers", {1}}}}}}};
  const json doc = {{"model", model},
                    {"sweep", {{"t_min", 1e-2}, {"t_max", 1e2}, {"count", 10}}},
                    {"n_samples", 20},
                    {"outputs", dir.string()}};
  spit(cfg, doc.dump(2));
  std::string out;
  CHECK(run_cli("analyze --config " + cfg.string(), &out) == 0);
  const auto report = json::parse(slurp(dir / "report.json"));
  CHECK(report.at("model") == "linear_decay");
  CHECK(report.at("errors").empty());
}

TEST_CASE("validate command cross-checks every derivative route") {
  CHECK(run_cli("validate --model saddle_node --tmax 5") == 0);
  CHECK(run_cli("validate --model toy_exponential") == 0);
  CHECK(run_cli("validate --model selkov --tmax 50") == 0);

  std::string err;
  CHECK(run_cli("validate --model no_such_model", nullptr, &err) == 1);
  CHECK(err.find("unknown model") != std::string::npos);
}

TEST_CASE("list-models names the whole registry") {
  std::string out;
  CHECK(run_cli("list-models", &out) == 0);
  for (const char* name :
       {"toy_exponential", "saddle_node", "transcritical", "pitchfork_super", "pitchfork_sub",
        "hopf_polar", "nonnormal_transcritical", "modified_transcritical", "selkov"})
    CHECK_MESSAGE(out.find(name) != std::string::npos, name);
  CHECK(out.find("c4") != std::string::npos);  // parameters are listed too
}
