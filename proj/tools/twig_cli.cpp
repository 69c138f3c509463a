#include "twig/classify.hpp"
#include "twig/oracles.hpp"
#include "twig/registry.hpp"
#include "twig/report_io.hpp"
#include "twig/sensitivity.hpp"
#include "twig/sweep.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitPartial = 2;
constexpr int kExitValidation = 3;

// Best-effort: surface a config-stage failure in report.json when the
// document got far enough to name an output directory.
void try_write_error_report(const json* doc, const std::string& message) {
  if (doc == nullptr || !doc->is_object() || !doc->contains("outputs") ||
      !(*doc)["outputs"].is_string())
    return;
  try {
    const std::string dir = (*doc)["outputs"].get<std::string>();
    std::filesystem::create_directories(dir);
    nlohmann::ordered_json out;
    out["errors"] = {message};
    std::ofstream f(dir + "/report.json", std::ios::binary);
    f << out.dump(2) << '\n';
  } catch (...) {
    // the primary error has already been printed; nothing more to do
  }
}

int run_analyze(const std::string& config_path, bool dump_trajectories) {
  json doc;
  {
    std::ifstream in(config_path, std::ios::binary);
    if (!in) {
      std::cerr << "error: cannot read config file: " << config_path << "\n";
      return kExitConfig;
    }
    try {
      in >> doc;
    } catch (const json::parse_error& e) {
      std::cerr << "error: config is not valid JSON: " << e.what() << "\n";
      return kExitConfig;
    }
  }

  twig::RunConfig cfg;
  twig::ModelSystem<double> model;
  twig::VecXd theta;
  int nb_param_index = -1;
  try {
    cfg = twig::parse_run_config(doc);
    if (cfg.custom_model)
      model = twig::model_from_json(*cfg.custom_model);
    else
      model = twig::build_model(cfg.model_name, cfg.order);
    theta = model.default_params();
    for (const auto& [name, value] : cfg.param_overrides) {
      const int j = model.param_index(name);
      if (j < 0)
        throw std::invalid_argument("config: unknown parameter \"" + name + "\" for model " +
                                    model.name);
      theta[j] = value;
    }
    if (cfg.near_bifurcation_param) {
      nb_param_index = model.param_index(*cfg.near_bifurcation_param);
      if (nb_param_index < 0)
        throw std::invalid_argument("config: near_bifurcation.param \"" + *cfg.near_bifurcation_param +
                                    "\" is not a parameter of model " + model.name);
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    try_write_error_report(&doc, e.what());
    return kExitConfig;
  }

  twig::SweepOptions sopt;
  sopt.horizons = twig::geometric_grid(cfg.t_min, cfg.t_max, cfg.count);
  sopt.n_samples = cfg.n_samples;
  sopt.recenter = cfg.recenter;

  std::vector<std::string> errors;
  std::optional<twig::TwigSweep> sweep;
  std::optional<twig::TwigReport> report;
  std::optional<std::vector<twig::OffsetProfile>> profiles;

  try {
    sweep = twig::run_sweep(model, theta, sopt);
    if (sweep->failure)
      errors.push_back("partial sweep: " + sweep->failure->message + " (kept " +
                       std::to_string(sweep->horizons.size()) + " of " +
                       std::to_string(cfg.count) + " horizons, first lost t_max=" +
                       twig::format_g17(sweep->failure->t_max) + ")");
  } catch (const std::exception& e) {
    errors.push_back(std::string("sweep failed: ") + e.what());
  }

  if (sweep) {
    try {
      report = twig::classify(model, *sweep, cfg.classification);
    } catch (const std::exception& e) {
      errors.push_back(std::string("classification failed: ") + e.what());
    }
  }

  if (nb_param_index >= 0) {
    try {
      profiles = twig::near_bifurcation_profile(model, theta, nb_param_index,
                                                cfg.near_bifurcation_offsets, sopt,
                                                cfg.classification);
      for (const auto& p : *profiles)
        if (p.error)
          errors.push_back("near-bifurcation offset " + twig::format_g17(p.offset) +
                           " failed: " + *p.error);
    } catch (const std::exception& e) {
      errors.push_back(std::string("near-bifurcation profile failed: ") + e.what());
    }
  }

  try {
    std::filesystem::create_directories(cfg.output_dir);
    const auto path = [&](const char* name) { return cfg.output_dir + "/" + name; };
    const auto doc_out = twig::report_to_json(cfg, model, theta, sweep ? &*sweep : nullptr,
                                              report ? &*report : nullptr,
                                              profiles ? &*profiles : nullptr, errors);
    {
      std::ofstream f(path("report.json"), std::ios::binary);
      if (!f) throw std::runtime_error("cannot open " + path("report.json"));
      f << doc_out.dump(2) << '\n';
    }
    if (sweep && report) {
      twig::write_eigenvalues_csv(path("eigenvalues.csv"), *sweep, *report);
      twig::write_participation_csv(path("participation.csv"), *sweep);
      twig::write_rainbow_svg(path("rainbow.svg"), *sweep, *report);
      if (dump_trajectories) twig::write_trajectories_csv(path("trajectories.csv"), *sweep);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: cannot write outputs: " << e.what() << "\n";
    return kExitConfig;
  }

  for (const auto& e : errors) std::cerr << "warning: " << e << "\n";
  if (report) {
    std::cout << model.name << ": codimension " << report->codimension << " (raw "
              << report->codimension_raw << "), converged " << (report->converged ? "yes" : "no")
              << ", " << (errors.empty() ? "full sweep" : "partial sweep") << "\n";
  }
  return errors.empty() ? kExitOk : kExitPartial;
}

struct WorstError {
  double value = 0.0;
  std::string param;
  double time = 0.0;
  std::string check;

  void offer(double v, const std::string& p, double t, const std::string& c) {
    if (v > value) {
      value = v;
      param = p;
      time = t;
      check = c;
    }
  }
};

int run_validate(const std::string& name, double tmax, int order) {
  twig::ModelSystem<double> model;
  try {
    model = twig::build_model(name, order);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  if (!(tmax > 0.0)) {
    std::cerr << "error: --tmax must be positive\n";
    return kExitConfig;
  }

  const twig::SampleGrid grid(0.0, tmax, 20);
  const twig::VecXd times_vec = grid.times();
  const std::vector<double> times(times_vec.data(), times_vec.data() + times_vec.size());
  const twig::VecXd theta = model.default_params();
  const double tol = 1e-4;
  WorstError worst;

  try {
    if (model.has_rhs()) {
      // The finite-difference path carries noise of roughly (integrator
      // tolerance)/step; integrate tighter than the defaults and measure
      // errors against a resolution floor so that noise on exactly-zero
      // entries is not misread as relative error 1.
      twig::IntegrateOptions<double> iopt;
      iopt.abs_tol = 1e-12;
      iopt.rel_tol = 1e-10;
      const auto sens = twig::integrate_with_sensitivities<double>(model, theta, grid, std::nullopt, iopt);
      const auto fd = twig::finite_difference_jacobian(model, theta, grid, iopt);
      // Differences of two tight integrations still carry ~1e-10 of absolute
      // noise per finite-difference entry, so entries below 1e-5 of the
      // largest sensitivity are compared at that resolution, not relatively.
      const double floor =
          std::max(1e-10, 1e-5 * sens.jacobian.array().abs().maxCoeff());
      const int n_obs = static_cast<int>(sens.observed_components.size());
      for (int j = 0; j < model.param_count(); ++j) {
        double col_worst = 0.0, col_t = 0.0;
        for (int i = 0; i < grid.n_samples; ++i)
          for (int k = 0; k < n_obs; ++k) {
            const double a = sens.jacobian(i * n_obs + k, j);
            const double b = fd.jacobian(i * n_obs + k, j);
            const double e = std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), floor});
            if (e > col_worst) {
              col_worst = e;
              col_t = times[static_cast<std::size_t>(i)];
            }
          }
        std::printf("  %-24s vs finite differences: max rel err %.3e\n",
                    model.parameters[static_cast<std::size_t>(j)].name.c_str(), col_worst);
        worst.offer(col_worst, model.parameters[static_cast<std::size_t>(j)].name, col_t,
                    "finite differences");
      }

      twig::OracleSpec spec;
      bool have_oracle = true;
      if (name == "saddle_node") spec.family = twig::OracleFamily::saddle_node;
      else if (name == "transcritical") spec.family = twig::OracleFamily::transcritical;
      else if (name == "pitchfork_super") spec.family = twig::OracleFamily::pitchfork_super;
      else if (name == "pitchfork_sub") spec.family = twig::OracleFamily::pitchfork_sub;
      else have_oracle = false;

      if (have_oracle) {
        // The closed forms describe the system exactly at its bifurcation
        // point, so the comparison runs with r pinned to 0 (only pitchfork_sub
        // defaults sit slightly off it).
        twig::VecXd th = theta;
        th[0] = 0.0;
        spec.y0 = th[model.param_count() - 1];
        if (auto ts = spec.singular_time(); ts && tmax >= *ts) {
          std::cerr << "error: --tmax " << tmax << " reaches the closed-form singular time " << *ts
                    << " for " << name << "\n";
          return kExitConfig;
        }
        const int ord = model.param_count() - 2;
        const twig::MatXd expected = twig::oracle_jacobian(spec, times, ord);
        const auto at_bif = twig::integrate_with_sensitivities<double>(model, th, grid, std::nullopt, iopt);
        for (int j = 0; j < model.param_count(); ++j) {
          double scale = 1e-12;
          for (int i = 0; i < grid.n_samples; ++i)
            scale = std::max(scale, std::fabs(expected(i, j)));
          double col_worst = 0.0, col_t = 0.0;
          for (int i = 0; i < grid.n_samples; ++i) {
            const double e = std::fabs(at_bif.jacobian(i, j) - expected(i, j)) / scale;
            if (e > col_worst) {
              col_worst = e;
              col_t = times[static_cast<std::size_t>(i)];
            }
          }
          std::printf("  %-24s vs closed form:         max rel err %.3e\n",
                      model.parameters[static_cast<std::size_t>(j)].name.c_str(), col_worst);
          worst.offer(col_worst, model.parameters[static_cast<std::size_t>(j)].name, col_t,
                      "closed form");
        }
      }
    } else {
      // Closed-form-only model: the reported Jacobian is a finite-difference
      // stencil of the map itself, so cross-check it against the exact
      // derivatives of that map.
      const auto sampled = twig::sample_closed_form(model, theta, times);
      for (int j = 0; j < model.param_count(); ++j) {
        double col_worst = 0.0, col_t = 0.0;
        for (int i = 0; i < grid.n_samples; ++i) {
          const double t = times[static_cast<std::size_t>(i)];
          double exact = 0.0;
          if (j == 0) exact = 1.0;
          if (j == 1) exact = -t * std::exp(-theta[1] * t);
          if (j == 2) exact = t * std::exp(theta[2] * t);
          const double a = sampled.jacobian(i, j);
          const double mag = std::max(std::fabs(a), std::fabs(exact));
          if (mag <= 1e-10) continue;
          const double e = std::fabs(a - exact) / mag;
          if (e > col_worst) {
            col_worst = e;
            col_t = t;
          }
        }
        std::printf("  %-24s vs exact derivative:    max rel err %.3e\n",
                    model.parameters[static_cast<std::size_t>(j)].name.c_str(), col_worst);
        worst.offer(col_worst, model.parameters[static_cast<std::size_t>(j)].name, col_t,
                    "exact derivative");
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: validation run failed: " << e.what() << "\n";
    return kExitValidation;
  }

  if (worst.value > tol) {
    std::printf("FAIL: worst error %.3e exceeds %.0e (parameter %s, t=%g, %s)\n", worst.value, tol,
                worst.param.c_str(), worst.time, worst.check.c_str());
    return kExitValidation;
  }
  std::printf("OK: all sensitivity checks below %.0e (worst %.3e)\n", tol, worst.value);
  return kExitOk;
}

int run_list_models() {
  for (const auto& info : twig::list_models()) {
    const auto model = twig::build_model(info.name);
    std::printf("%s (default order %d%s)\n", info.name.c_str(), info.default_order,
                info.order_adjustable ? "" : ", fixed");
    std::printf("  parameters:");
    for (const auto& p : model.parameters)
      std::printf(" %s=%g%s", p.name.c_str(), p.value,
                  p.kind == twig::ParamKind::initial_condition ? "(ic)" : "");
    std::printf("\n  %s\n\n", info.description.c_str());
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"twig: horizon-sweep information-geometry analysis of bifurcating systems"};
  app.require_subcommand(1);

  std::string config_path;
  bool dump_trajectories = false;
  auto* analyze = app.add_subcommand("analyze", "run a sweep described by a JSON config");
  analyze->add_option("--config", config_path, "path to the JSON run configuration")->required();
  analyze->add_flag("--dump-trajectories", dump_trajectories,
                    "also write trajectories.csv for the largest horizon");

  std::string model_name;
  double tmax = 1.0;
  int order = -1;
  auto* validate = app.add_subcommand("validate", "cross-check sensitivities for one model");
  validate->add_option("--model", model_name, "registry model name")->required();
  validate->add_option("--tmax", tmax, "horizon for the validation grid (default 1)");
  validate->add_option("--order", order, "nuisance order (default: model default)");

  auto* list = app.add_subcommand("list-models", "print the model registry");

  CLI11_PARSE(app, argc, argv);

  if (analyze->parsed()) return run_analyze(config_path, dump_trajectories);
  if (validate->parsed()) return run_validate(model_name, tmax, order);
  if (list->parsed()) return run_list_models();
  return kExitConfig;
}
