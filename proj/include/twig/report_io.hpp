#pragma once

#include "twig/classify.hpp"
#include "twig/model.hpp"
#include "twig/sweep.hpp"

#include <nlohmann/json.hpp>

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace twig {

// A complete analysis request, parsed from a single JSON document:
//   {"model": <name or inline custom-model object>, "order": k,
//    "params": {name: value, ...}, "sweep": {"t_min","t_max","count"},
//    "n_samples": 50, "recenter": false,
//    "near_bifurcation": {"param": name, "offsets": [..]},
//    "classification": {"tail_fraction","slope_tol"},
//    "outputs": "dir", "seed": 0}
struct RunConfig {
  std::string model_name;                       // empty when custom_model is set
  std::optional<nlohmann::json> custom_model;
  int order = -1;                               // -1: model default
  std::map<std::string, double> param_overrides;
  double t_min = 1e-2;
  double t_max = 1e3;
  int count = 60;
  int n_samples = 50;
  bool recenter = false;
  std::optional<std::string> near_bifurcation_param;
  std::vector<double> near_bifurcation_offsets;
  ClassifyOptions classification;
  std::string output_dir = "twig_out";
  long seed = 0;
};

// Throws std::invalid_argument with a actionable message on any schema
// violation (unknown keys included, so typos cannot silently change a run).
RunConfig parse_run_config(const nlohmann::json& doc);

// %.17g: enough digits that re-parsing reproduces the exact double, which is
// what makes byte-identical output a meaningful determinism check.
std::string format_g17(double v);

void write_eigenvalues_csv(const std::string& path, const TwigSweep& sweep,
                           const TwigReport& report);
void write_participation_csv(const std::string& path, const TwigSweep& sweep);
void write_trajectories_csv(const std::string& path, const TwigSweep& sweep);

// Full report document (also the round-trip schema for report.json).
nlohmann::ordered_json report_to_json(const RunConfig& config, const ModelSystem<double>& model,
                                      const VecXd& theta, const TwigSweep* sweep,
                                      const TwigReport* report,
                                      const std::vector<OffsetProfile>* profiles,
                                      const std::vector<std::string>& errors);

// Log-log eigenvalue traces, one polyline per tracked direction, stroked
// segment-by-segment with per-parameter colors blended by that horizon's
// participation; parameter color legend at the right.
void write_rainbow_svg(const std::string& path, const TwigSweep& sweep, const TwigReport& report);

}  // namespace twig
