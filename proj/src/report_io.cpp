#include "twig/report_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace twig {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

[[noreturn]] void config_error(const std::string& msg) {
  throw std::invalid_argument("config: " + msg);
}

void require_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed)
      if (it.key() == k) {
        ok = true;
        break;
      }
    if (!ok) config_error("unknown key \"" + it.key() + "\" in " + where);
  }
}

double as_number(const json& v, const std::string& what) {
  if (!v.is_number()) config_error(what + " must be a number");
  return v.get<double>();
}

int as_int(const json& v, const std::string& what) {
  if (!v.is_number_integer()) config_error(what + " must be an integer");
  return v.get<int>();
}

// JSON has no NaN/Inf; emit null so the document re-parses losslessly.
ordered_json finite_or_null(double v) {
  if (!std::isfinite(v)) return nullptr;
  return v;
}

ordered_json vec_to_json(const VecXd& v) {
  ordered_json a = ordered_json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(finite_or_null(v[i]));
  return a;
}

struct Rgb {
  double r, g, b;
};

Rgb param_color(int index, int count) {
  // Evenly spaced hues; fixed saturation/value keeps blends readable.
  const double h = std::fmod(index * (360.0 / std::max(count, 1)) + 15.0, 360.0);
  const double s = 0.72, v = 0.85;
  const double c = v * s;
  const double x = c * (1.0 - std::fabs(std::fmod(h / 60.0, 2.0) - 1.0));
  const double m = v - c;
  double r = 0, g = 0, b = 0;
  if (h < 60) {
    r = c, g = x;
  } else if (h < 120) {
    r = x, g = c;
  } else if (h < 180) {
    g = c, b = x;
  } else if (h < 240) {
    g = x, b = c;
  } else if (h < 300) {
    r = x, b = c;
  } else {
    r = c, b = x;
  }
  return {r + m, g + m, b + m};
}

std::string rgb_hex(const Rgb& c) {
  auto ch = [](double v) {
    int i = static_cast<int>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
    char buf[3];
    std::snprintf(buf, sizeof(buf), "%02x", i);
    return std::string(buf);
  };
  return "#" + ch(c.r) + ch(c.g) + ch(c.b);
}

std::string svg_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

void open_or_throw(std::ofstream& out, const std::string& path) {
  out.open(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open output file: " + path);
}

}  // namespace

std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

RunConfig parse_run_config(const json& doc) {
  if (!doc.is_object()) config_error("top level must be a JSON object");
  require_keys(doc, "top level",
               {"model", "order", "params", "sweep", "n_samples", "recenter", "near_bifurcation",
                "classification", "outputs", "seed"});

  RunConfig cfg;

  if (!doc.contains("model")) config_error("missing required key \"model\"");
  const json& m = doc.at("model");
  if (m.is_string()) {
    cfg.model_name = m.get<std::string>();
  } else if (m.is_object()) {
    cfg.custom_model = m;
  } else {
    config_error("\"model\" must be a registry name or an inline model object");
  }

  if (doc.contains("order")) {
    cfg.order = as_int(doc.at("order"), "\"order\"");
    if (cfg.order < 0) config_error("\"order\" must be non-negative");
  }

  if (doc.contains("params")) {
    const json& p = doc.at("params");
    if (!p.is_object()) config_error("\"params\" must be an object of name: value");
    for (auto it = p.begin(); it != p.end(); ++it)
      cfg.param_overrides[it.key()] = as_number(it.value(), "params." + it.key());
  }

  if (doc.contains("sweep")) {
    const json& s = doc.at("sweep");
    if (!s.is_object()) config_error("\"sweep\" must be an object");
    require_keys(s, "\"sweep\"", {"t_min", "t_max", "count"});
    if (s.contains("t_min")) cfg.t_min = as_number(s.at("t_min"), "sweep.t_min");
    if (s.contains("t_max")) cfg.t_max = as_number(s.at("t_max"), "sweep.t_max");
    if (s.contains("count")) cfg.count = as_int(s.at("count"), "sweep.count");
  }
  if (!(cfg.t_min > 0.0)) config_error("sweep.t_min must be positive");
  if (!(cfg.t_min < cfg.t_max)) config_error("sweep.t_min must be smaller than sweep.t_max");
  if (cfg.count < 8) config_error("sweep.count must be at least 8");

  if (doc.contains("n_samples")) {
    cfg.n_samples = as_int(doc.at("n_samples"), "\"n_samples\"");
    if (cfg.n_samples < 4) config_error("\"n_samples\" must be at least 4");
  }

  if (doc.contains("recenter")) {
    if (!doc.at("recenter").is_boolean()) config_error("\"recenter\" must be a boolean");
    cfg.recenter = doc.at("recenter").get<bool>();
  }

  if (doc.contains("near_bifurcation")) {
    const json& nb = doc.at("near_bifurcation");
    if (!nb.is_object()) config_error("\"near_bifurcation\" must be an object");
    require_keys(nb, "\"near_bifurcation\"", {"param", "offsets"});
    if (!nb.contains("param") || !nb.at("param").is_string())
      config_error("near_bifurcation.param must name a parameter");
    if (!nb.contains("offsets") || !nb.at("offsets").is_array() || nb.at("offsets").empty())
      config_error("near_bifurcation.offsets must be a non-empty array of numbers");
    cfg.near_bifurcation_param = nb.at("param").get<std::string>();
    for (const auto& o : nb.at("offsets"))
      cfg.near_bifurcation_offsets.push_back(as_number(o, "near_bifurcation.offsets entry"));
  }

  if (doc.contains("classification")) {
    const json& c = doc.at("classification");
    if (!c.is_object()) config_error("\"classification\" must be an object");
    require_keys(c, "\"classification\"", {"tail_fraction", "slope_tol"});
    if (c.contains("tail_fraction")) {
      cfg.classification.tail_fraction = as_number(c.at("tail_fraction"), "classification.tail_fraction");
      if (!(cfg.classification.tail_fraction > 0.0) || cfg.classification.tail_fraction > 1.0)
        config_error("classification.tail_fraction must lie in (0, 1]");
    }
    if (c.contains("slope_tol")) {
      cfg.classification.slope_tol = as_number(c.at("slope_tol"), "classification.slope_tol");
      if (!(cfg.classification.slope_tol > 0.0)) config_error("classification.slope_tol must be positive");
    }
  }

  if (doc.contains("outputs")) {
    if (!doc.at("outputs").is_string()) config_error("\"outputs\" must be a directory path string");
    cfg.output_dir = doc.at("outputs").get<std::string>();
    if (cfg.output_dir.empty()) config_error("\"outputs\" must not be empty");
  }

  if (doc.contains("seed")) cfg.seed = static_cast<long>(as_int(doc.at("seed"), "\"seed\""));

  return cfg;
}

void write_eigenvalues_csv(const std::string& path, const TwigSweep& sweep,
                           const TwigReport& report) {
  std::ofstream out;
  open_or_throw(out, path);
  out << "t_max,direction_index,lambda,slope\n";
  for (std::size_t s = 0; s < sweep.spectra.size(); ++s) {
    for (std::size_t k = 0; k < report.directions.size(); ++k) {
      out << format_g17(sweep.horizons[static_cast<Eigen::Index>(s)]) << ',' << k << ','
          << format_g17(sweep.spectra[s].eigenvalues[static_cast<Eigen::Index>(k)]) << ','
          << format_g17(report.directions[k].tail_slope) << '\n';
    }
  }
}

void write_participation_csv(const std::string& path, const TwigSweep& sweep) {
  std::ofstream out;
  open_or_throw(out, path);
  out << "t_max,direction_index,param_name,p\n";
  for (std::size_t s = 0; s < sweep.spectra.size(); ++s) {
    const auto& sp = sweep.spectra[s];
    for (Eigen::Index k = 0; k < sp.participation.cols(); ++k)
      for (Eigen::Index j = 0; j < sp.participation.rows(); ++j)
        out << format_g17(sweep.horizons[static_cast<Eigen::Index>(s)]) << ',' << k << ','
            << sweep.param_names[static_cast<std::size_t>(j)]
            << ',' << format_g17(sp.participation(j, k)) << '\n';
  }
}

void write_trajectories_csv(const std::string& path, const TwigSweep& sweep) {
  std::ofstream out;
  open_or_throw(out, path);
  out << "t";
  for (Eigen::Index s = 0; s < sweep.final_states_raw.cols(); ++s) out << ",y" << (s + 1);
  out << '\n';
  const auto times = sweep.final_grid.times();
  for (Eigen::Index i = 0; i < times.size(); ++i) {
    out << format_g17(times[i]);
    for (Eigen::Index s = 0; s < sweep.final_states_raw.cols(); ++s)
      out << ',' << format_g17(sweep.final_states_raw(i, s));
    out << '\n';
  }
}

nlohmann::ordered_json report_to_json(const RunConfig& config, const ModelSystem<double>& model,
                                      const VecXd& theta, const TwigSweep* sweep,
                                      const TwigReport* report,
                                      const std::vector<OffsetProfile>* profiles,
                                      const std::vector<std::string>& errors) {
  ordered_json doc;
  doc["model"] = model.name;
  ordered_json params = ordered_json::object();
  for (std::size_t j = 0; j < model.parameters.size(); ++j)
    params[model.parameters[j].name] = finite_or_null(theta[static_cast<Eigen::Index>(j)]);
  doc["params"] = params;
  doc["sweep"] = {{"t_min", config.t_min}, {"t_max", config.t_max}, {"count", config.count}};
  doc["n_samples"] = config.n_samples;
  doc["recenter"] = config.recenter;
  doc["classification"] = {{"tail_fraction", config.classification.tail_fraction},
                           {"slope_tol", config.classification.slope_tol}};
  doc["seed"] = config.seed;

  if (sweep != nullptr) {
    ordered_json horizons = ordered_json::array();
    for (double h : sweep->horizons) horizons.push_back(h);
    doc["horizons"] = horizons;
  }

  if (report != nullptr && sweep != nullptr) {
    ordered_json dirs = ordered_json::array();
    for (const auto& d : report->directions) {
      ordered_json pj = ordered_json::object();
      for (Eigen::Index j = 0; j < d.participation_final.size(); ++j)
        pj[sweep->param_names[static_cast<std::size_t>(j)]] = finite_or_null(d.participation_final[j]);
      ordered_json dj;
      dj["track"] = d.track;
      dj["classification"] = to_string(d.classification);
      dj["tail_slope"] = finite_or_null(d.tail_slope);
      dj["floored"] = d.floored;
      dj["lambda_final"] = finite_or_null(d.lambda_final);
      dj["dominant_param"] = d.dominant_param;
      dj["dominant_participation"] = finite_or_null(d.dominant_participation);
      dj["participation"] = pj;
      dj["frequency_flag"] = d.frequency_flag;
      dj["frequency_correlation"] = finite_or_null(d.frequency_correlation);
      dirs.push_back(dj);
    }
    doc["directions"] = dirs;
    doc["codimension"] = report->codimension;
    doc["codimension_raw"] = report->codimension_raw;
    doc["converged"] = report->converged;
    doc["min_overlap"] = finite_or_null(report->min_overlap);
    doc["tracking_ambiguous"] = report->tracking_ambiguous;
    ordered_json normal = ordered_json::object();
    for (Eigen::Index j = 0; j < report->separatrix_normal.size(); ++j)
      normal[sweep->param_names[static_cast<std::size_t>(j)]] =
          finite_or_null(report->separatrix_normal[j]);
    doc["separatrix_normal"] = normal;
    doc["oscillatory"] = report->oscillatory;
    doc["period_estimate"] =
        report->period_estimate ? ordered_json(finite_or_null(*report->period_estimate)) : ordered_json(nullptr);
    doc["recenter_fixed_point"] =
        sweep->recenter_fixed_point ? vec_to_json(*sweep->recenter_fixed_point) : ordered_json(nullptr);
  }

  if (profiles != nullptr) {
    ordered_json arr = ordered_json::array();
    for (const auto& p : *profiles) {
      ordered_json pj;
      pj["offset"] = p.offset;
      if (p.error) {
        pj["error"] = *p.error;
      } else {
        ordered_json hz = ordered_json::array();
        for (double h : p.horizons) hz.push_back(h);
        ordered_json ll = ordered_json::array();
        for (double l : p.leading_lambda) ll.push_back(finite_or_null(l));
        pj["horizons"] = hz;
        pj["leading_lambda"] = ll;
        pj["leading_tail_slope"] = finite_or_null(p.leading_tail_slope);
        pj["max_local_slope_first_half"] = finite_or_null(p.max_local_slope_first_half);
        pj["intermediate_regime_end"] = p.intermediate_regime_end
                                            ? ordered_json(finite_or_null(*p.intermediate_regime_end))
                                            : ordered_json(nullptr);
        pj["rising_at_final_horizon"] = p.rising_at_final_horizon;
        if (p.report) pj["codimension"] = p.report->codimension;
        pj["error"] = nullptr;
      }
      arr.push_back(pj);
    }
    doc["near_bifurcation"] = arr;
  } else {
    doc["near_bifurcation"] = nullptr;
  }

  ordered_json errs = ordered_json::array();
  for (const auto& e : errors) errs.push_back(e);
  doc["errors"] = errs;
  return doc;
}

void write_rainbow_svg(const std::string& path, const TwigSweep& sweep, const TwigReport& report) {
  const int width = 960, height = 600;
  const double left = 70, right = 220, top = 50, bottom = 60;
  const double plot_w = width - left - right, plot_h = height - top - bottom;
  const int m = static_cast<int>(sweep.param_names.size());

  // Data ranges in log10 space; eigenvalues clamped well below the floor so
  // floored directions still draw at the bottom edge instead of vanishing.
  const double x_lo = std::log10(sweep.horizons[0]);
  const double x_hi = std::log10(sweep.horizons[sweep.horizons.size() - 1]);
  double y_lo = 0.0, y_hi = 1.0;
  bool have_y = false;
  for (const auto& sp : sweep.spectra)
    for (Eigen::Index k = 0; k < sp.eigenvalues.size(); ++k) {
      const double lv = std::log10(std::max(sp.eigenvalues[k], 1e-300));
      if (!have_y) {
        y_lo = y_hi = lv;
        have_y = true;
      } else {
        y_lo = std::min(y_lo, lv);
        y_hi = std::max(y_hi, lv);
      }
    }
  y_lo = std::max(y_lo, y_hi - 40.0);  // keep the axis readable when values hit the floor
  if (y_hi - y_lo < 1.0) y_hi = y_lo + 1.0;

  auto px = [&](double t) { return left + (std::log10(t) - x_lo) / (x_hi - x_lo) * plot_w; };
  auto py = [&](double lambda) {
    const double lv = std::clamp(std::log10(std::max(lambda, 1e-300)), y_lo, y_hi);
    return top + (y_hi - lv) / (y_hi - y_lo) * plot_h;
  };

  std::ofstream out;
  open_or_throw(out, path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
  out << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
  out << "<text x=\"" << svg_num(left + plot_w / 2) << "\" y=\"28\" font-family=\"sans-serif\" "
         "font-size=\"16\" text-anchor=\"middle\">information spectrum vs horizon</text>\n";

  // axes
  out << "<line x1=\"" << svg_num(left) << "\" y1=\"" << svg_num(top + plot_h) << "\" x2=\""
      << svg_num(left + plot_w) << "\" y2=\"" << svg_num(top + plot_h)
      << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
  out << "<line x1=\"" << svg_num(left) << "\" y1=\"" << svg_num(top) << "\" x2=\"" << svg_num(left)
      << "\" y2=\"" << svg_num(top + plot_h) << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
  for (int e = static_cast<int>(std::ceil(x_lo)); e <= static_cast<int>(std::floor(x_hi)); ++e) {
    const double x = left + (e - x_lo) / (x_hi - x_lo) * plot_w;
    out << "<line x1=\"" << svg_num(x) << "\" y1=\"" << svg_num(top + plot_h) << "\" x2=\"" << svg_num(x)
        << "\" y2=\"" << svg_num(top + plot_h + 5) << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << svg_num(x) << "\" y=\"" << svg_num(top + plot_h + 20)
        << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">1e" << e << "</text>\n";
  }
  const int y_step = std::max(1, static_cast<int>((y_hi - y_lo) / 8.0));
  for (int e = static_cast<int>(std::ceil(y_lo)); e <= static_cast<int>(std::floor(y_hi)); e += y_step) {
    const double y = top + (y_hi - e) / (y_hi - y_lo) * plot_h;
    out << "<line x1=\"" << svg_num(left - 5) << "\" y1=\"" << svg_num(y) << "\" x2=\"" << svg_num(left)
        << "\" y2=\"" << svg_num(y) << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << svg_num(left - 9) << "\" y=\"" << svg_num(y + 4)
        << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">1e" << e << "</text>\n";
  }
  out << "<text x=\"" << svg_num(left + plot_w / 2) << "\" y=\"" << svg_num(height - 18)
      << "\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\">horizon t_max</text>\n";
  out << "<text x=\"20\" y=\"" << svg_num(top + plot_h / 2)
      << "\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 20 "
      << svg_num(top + plot_h / 2) << ")\">eigenvalue</text>\n";

  // one polyline per direction, drawn as segments whose color blends the
  // per-parameter palette by that horizon's participation
  for (std::size_t k = 0; k < report.directions.size(); ++k) {
    const auto& d = report.directions[k];
    double sw = 1.2;
    if (d.classification == DirectionClass::relevant) sw = 2.2;
    if (d.classification == DirectionClass::hyperrelevant) sw = 3.2;
    const char* dash = d.floored ? " stroke-dasharray=\"4 3\"" : "";
    for (std::size_t s = 0; s + 1 < sweep.spectra.size(); ++s) {
      Rgb blend{0, 0, 0};
      for (int j = 0; j < m; ++j) {
        const double w = sweep.spectra[s].participation(j, static_cast<Eigen::Index>(k));
        const Rgb c = param_color(j, m);
        blend.r += w * c.r;
        blend.g += w * c.g;
        blend.b += w * c.b;
      }
      out << "<line x1=\"" << svg_num(px(sweep.horizons[static_cast<Eigen::Index>(s)])) << "\" y1=\""
          << svg_num(py(sweep.spectra[s].eigenvalues[static_cast<Eigen::Index>(k)])) << "\" x2=\""
          << svg_num(px(sweep.horizons[static_cast<Eigen::Index>(s + 1)])) << "\" y2=\""
          << svg_num(py(sweep.spectra[s + 1].eigenvalues[static_cast<Eigen::Index>(k)])) << "\" stroke=\""
          << rgb_hex(blend) << "\" stroke-width=\"" << svg_num(sw) << "\" stroke-linecap=\"round\"" << dash
          << "/>\n";
    }
  }

  // parameter color legend
  const double lx = width - right + 24;
  out << "<text x=\"" << svg_num(lx) << "\" y=\"" << svg_num(top + 4)
      << "\" font-family=\"sans-serif\" font-size=\"13\">parameters</text>\n";
  for (int j = 0; j < m; ++j) {
    const double y = top + 22 + 18.0 * j;
    out << "<rect x=\"" << svg_num(lx) << "\" y=\"" << svg_num(y - 9) << "\" width=\"14\" height=\"10\" fill=\""
        << rgb_hex(param_color(j, m)) << "\"/>\n";
    out << "<text x=\"" << svg_num(lx + 20) << "\" y=\"" << svg_num(y)
        << "\" font-family=\"sans-serif\" font-size=\"12\">" << sweep.param_names[static_cast<std::size_t>(j)]
        << "</text>\n";
  }
  out << "</svg>\n";
}

}  // namespace twig
