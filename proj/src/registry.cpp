#include "twig/registry.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

namespace twig {

namespace {

using Model = ModelSystem<double>;
using Term = PolyTerm<double>;

long binomial(int n, int k) {
  long r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

Term term(double coeff, std::vector<int> powers,
          std::vector<std::pair<int, int>> param_exps = {}, int log_of = -1, int m = 0) {
  Term t;
  t.coeff = coeff;
  t.powers = std::move(powers);
  t.log_of = log_of;
  if (!param_exps.empty()) {
    t.param_powers.assign(m, 0);
    for (auto [j, e] : param_exps) t.param_powers[j] += e;
  }
  return t;
}

void check_order(const std::string& name, int order, int max_order) {
  if (order < 0 || order > max_order)
    throw std::invalid_argument("build_model: '" + name + "' supports order 0.." +
                                std::to_string(max_order) + ", got " + std::to_string(order));
}

Model make_toy_exponential() {
  Model m;
  m.name = "toy_exponential";
  m.description =
      "Closed-form observation map y(t) = theta1 + exp(-theta2 t) + exp(theta3 t): "
      "a constant offset, a decaying mode, and a growing mode; no ODE is integrated.";
  m.state_dim = 1;
  m.parameters = {{"theta1", 1.0, ParamKind::rate, -1},
                  {"theta2", 1.0, ParamKind::rate, -1},
                  {"theta3", 0.0, ParamKind::rate, -1}};
  m.closed_form = [](const VecXd& th, double t) {
    VecXd y(1);
    y[0] = th[0] + std::exp(-th[1] * t) + std::exp(th[2] * t);
    return y;
  };
  return m;
}

// One-dimensional normal forms dy/dt = base(y) + sum_n alpha_n y^(n+p).
Model make_one_d(const std::string& name, const std::string& description, int order,
                 double r_default, double y0_default,
                 const std::vector<Term>& base_terms_template, int alpha_power_offset) {
  Model m;
  m.name = name;
  m.description = description;
  m.state_dim = 1;
  m.parameters.push_back({"r", r_default, ParamKind::rate, -1});
  for (int n = 1; n <= order; ++n)
    m.parameters.push_back({"alpha" + std::to_string(n), 0.0, ParamKind::rate, -1});
  m.parameters.push_back({"y0", y0_default, ParamKind::initial_condition, 0});
  const int mcount = m.param_count();

  std::vector<Term> eq;
  for (Term t : base_terms_template) {
    if (!t.param_powers.empty()) t.param_powers.resize(mcount, 0);
    eq.push_back(std::move(t));
  }
  for (int n = 1; n <= order; ++n)
    eq.push_back(term(1.0, {n + alpha_power_offset}, {{n, 1}}, -1, mcount));
  m.equations = {std::move(eq)};
  return m;
}

Model make_saddle_node(int order) {
  check_order("saddle_node", order, 8);
  // dy/dt = r + y^2 + alpha_n y^(n+2)
  std::vector<Term> base = {term(1.0, {0}, {{0, 1}}, -1, 1), term(1.0, {2})};
  return make_one_d("saddle_node",
                    "Saddle-node normal form dy/dt = r + y^2 with optional nuisance terms "
                    "alpha_n y^(n+2); default y0 = -1 approaches the origin from below.",
                    order, 0.0, -1.0, base, 2);
}

Model make_transcritical(int order) {
  check_order("transcritical", order, 8);
  // dy/dt = r y - y^2 + alpha_n y^(n+2)
  std::vector<Term> base = {term(1.0, {1}, {{0, 1}}, -1, 1), term(-1.0, {2})};
  return make_one_d("transcritical",
                    "Transcritical normal form dy/dt = r y - y^2 with optional nuisance "
                    "terms alpha_n y^(n+2).",
                    order, 0.0, 1.0, base, 2);
}

Model make_pitchfork_super(int order) {
  check_order("pitchfork_super", order, 8);
  // dy/dt = r y - y^3 + alpha_n y^(n+3)
  std::vector<Term> base = {term(1.0, {1}, {{0, 1}}, -1, 1), term(-1.0, {3})};
  return make_one_d("pitchfork_super",
                    "Supercritical pitchfork normal form dy/dt = r y - y^3 with optional "
                    "nuisance terms alpha_n y^(n+3).",
                    order, 0.0, 1.0, base, 3);
}

Model make_pitchfork_sub(int order) {
  check_order("pitchfork_sub", order, 8);
  // dy/dt = r y + y^3 + alpha_n y^(n+3); defaults sit just on the stable side
  // with a small initial condition so the default run stays finite.
  std::vector<Term> base = {term(1.0, {1}, {{0, 1}}, -1, 1), term(1.0, {3})};
  return make_one_d("pitchfork_sub",
                    "Subcritical pitchfork normal form dy/dt = r y + y^3 with optional "
                    "nuisance terms alpha_n y^(n+3); defaults (r = -0.01, y0 = 0.05) sit "
                    "just on the stable side so trajectories stay finite.",
                    order, -0.01, 0.05, base, 3);
}

Model make_hopf_polar(int order) {
  check_order("hopf_polar", order, 5);
  Model m;
  m.name = "hopf_polar";
  m.description =
      "Hopf normal form in polar coordinates: radial dy/dt = mu y - y^3 (+ alpha1 y^4 + "
      "alpha2 y^5), angular dtheta/dt = omega + beta y^2 (+ alpha3 y^3 + alpha4 y^4 + "
      "alpha5 y^5).  Observations are the radius and the unwrapped angle.";
  m.state_dim = 2;
  m.coordinates = CoordinateKind::polar;
  m.angle_states = {1};
  m.parameters = {{"mu", 0.0, ParamKind::rate, -1},
                  {"omega", 1.0, ParamKind::rate, -1},
                  {"beta", 0.0, ParamKind::rate, -1}};
  for (int n = 1; n <= order; ++n)
    m.parameters.push_back({"alpha" + std::to_string(n), 0.0, ParamKind::rate, -1});
  m.parameters.push_back({"y0", 1.0, ParamKind::initial_condition, 0});
  m.parameters.push_back({"theta0", 0.0, ParamKind::initial_condition, 1});
  const int mc = m.param_count();

  std::vector<Term> radial = {term(1.0, {1, 0}, {{0, 1}}, -1, mc),   // mu y
                              term(-1.0, {3, 0})};                   // -y^3
  std::vector<Term> angular = {term(1.0, {0, 0}, {{1, 1}}, -1, mc),  // omega
                               term(1.0, {2, 0}, {{2, 1}}, -1, mc)}; // beta y^2
  for (int n = 1; n <= order; ++n) {
    const int pj = 3 + (n - 1);
    if (n <= 2)
      radial.push_back(term(1.0, {n + 3, 0}, {{pj, 1}}, -1, mc));    // alpha1 y^4, alpha2 y^5
    else
      angular.push_back(term(1.0, {n, 0}, {{pj, 1}}, -1, mc));       // alpha3..5 y^3..y^5
  }
  m.equations = {std::move(radial), std::move(angular)};
  return m;
}

// Append the binomial expansion of  c * (y - shift)^p  to eq, where the term
// is scaled by parameter `coeff_param` (exponent 1) if >= 0, and `shift` is
// either the literal shift_value (shift_param < 0) or parameter shift_param.
void push_shifted_power(std::vector<Term>& eq, int p, int coeff_param, int shift_param,
                        double shift_value, int mcount) {
  for (int i = 0; i <= p; ++i) {
    const double sign = ((p - i) % 2 == 0) ? 1.0 : -1.0;
    double coeff = sign * static_cast<double>(binomial(p, i));
    std::vector<std::pair<int, int>> pe;
    if (coeff_param >= 0) pe.emplace_back(coeff_param, 1);
    if (shift_param >= 0) {
      if (p - i > 0) pe.emplace_back(shift_param, p - i);
    } else {
      coeff *= std::pow(shift_value, p - i);
    }
    eq.push_back(term(coeff, {i}, std::move(pe), -1, mcount));
  }
}

Model make_nonnormal_transcritical(int order) {
  check_order("nonnormal_transcritical", order, 8);
  Model m;
  m.name = "nonnormal_transcritical";
  m.description =
      "Transcritical bifurcation hidden in a non-normal form: dy/dt = r ln(y) + (y - 1) + "
      "alpha_n (y - 1)^(n+1); critical at r = -1 where the fixed point y = 1 is marginal.";
  m.state_dim = 1;
  m.parameters.push_back({"r", -1.0, ParamKind::rate, -1});
  for (int n = 1; n <= order; ++n)
    m.parameters.push_back({"alpha" + std::to_string(n), 0.0, ParamKind::rate, -1});
  m.parameters.push_back({"y0", 0.5, ParamKind::initial_condition, 0});
  const int mc = m.param_count();

  std::vector<Term> eq = {term(1.0, {0}, {{0, 1}}, 0, mc),  // r ln y
                          term(1.0, {1}),                   // y
                          term(-1.0, {0})};                 // -1
  for (int n = 1; n <= order; ++n)
    push_shifted_power(eq, n + 1, /*coeff_param=*/n, /*shift_param=*/-1, 1.0, mc);
  m.equations = {std::move(eq)};
  return m;
}

Model make_modified_transcritical(int order) {
  check_order("modified_transcritical", order, 8);
  Model m;
  m.name = "modified_transcritical";
  m.description =
      "Two-parameter non-normal transcritical family dy/dt = r ln(y) + (y - alpha) + "
      "b_n (y - alpha)^(n+1); reaching the bifurcation requires tuning both r and alpha.";
  m.state_dim = 1;
  m.parameters.push_back({"r", -1.0, ParamKind::rate, -1});
  m.parameters.push_back({"alpha", 1.0, ParamKind::rate, -1});
  for (int n = 1; n <= order; ++n) {
    const std::string bname = (n == 1) ? "b" : "b" + std::to_string(n);
    m.parameters.push_back({bname, 0.0, ParamKind::rate, -1});
  }
  m.parameters.push_back({"y0", 0.5, ParamKind::initial_condition, 0});
  const int mc = m.param_count();

  std::vector<Term> eq = {term(1.0, {0}, {{0, 1}}, 0, mc)};  // r ln y
  push_shifted_power(eq, 1, /*coeff_param=*/-1, /*shift_param=*/1, 0.0, mc);  // (y - alpha)
  for (int n = 1; n <= order; ++n)
    push_shifted_power(eq, n + 1, /*coeff_param=*/2 + (n - 1), /*shift_param=*/1, 0.0, mc);
  m.equations = {std::move(eq)};
  return m;
}

Model make_selkov() {
  Model m;
  m.name = "selkov";
  m.description =
      "Two-species glycolytic oscillator: dx/dt = -x + a y + x^2 y + c1 x^2 y + c2 x^3, "
      "dy/dt = b - a y - x^2 y + c3 x^2 y + c4 y^2.  The fixed point is "
      "(b, b/(a + b^2)); defaults place b on the oscillation boundary with nuisance "
      "c_i = 0.  The nuisance set c1..c4 is fixed, so the order argument is ignored.";
  m.state_dim = 2;
  const double a = 0.1;
  const double b = std::sqrt(0.5 * (1.0 - 2.0 * a + std::sqrt(1.0 - 8.0 * a)));
  const double fx = b;
  const double fy = b / (a + b * b);
  m.parameters = {{"a", a, ParamKind::rate, -1},
                  {"b", b, ParamKind::rate, -1},
                  {"c1", 0.0, ParamKind::rate, -1},
                  {"c2", 0.0, ParamKind::rate, -1},
                  {"c3", 0.0, ParamKind::rate, -1},
                  {"c4", 0.0, ParamKind::rate, -1},
                  {"x0", fx + 0.1, ParamKind::initial_condition, 0},
                  {"y0", fy + 0.1, ParamKind::initial_condition, 1}};
  const int mc = m.param_count();
  std::vector<Term> ex = {term(-1.0, {1, 0}),                   // -x
                          term(1.0, {0, 1}, {{0, 1}}, -1, mc),  // a y
                          term(1.0, {2, 1}),                    // x^2 y
                          term(1.0, {2, 1}, {{2, 1}}, -1, mc),  // c1 x^2 y
                          term(1.0, {3, 0}, {{3, 1}}, -1, mc)}; // c2 x^3
  std::vector<Term> ey = {term(1.0, {0, 0}, {{1, 1}}, -1, mc),  // b
                          term(-1.0, {0, 1}, {{0, 1}}, -1, mc), // -a y
                          term(-1.0, {2, 1}),                   // -x^2 y
                          term(1.0, {2, 1}, {{4, 1}}, -1, mc),  // c3 x^2 y
                          term(1.0, {0, 2}, {{5, 1}}, -1, mc)}; // c4 y^2
  m.equations = {std::move(ex), std::move(ey)};
  return m;
}

}  // namespace

std::vector<ModelInfo> list_models() {
  return {
      {"toy_exponential", 0, false, make_toy_exponential().description},
      {"saddle_node", 2, true, make_saddle_node(0).description},
      {"transcritical", 5, true, make_transcritical(0).description},
      {"pitchfork_super", 5, true, make_pitchfork_super(0).description},
      {"pitchfork_sub", 5, true, make_pitchfork_sub(0).description},
      {"hopf_polar", 5, true, make_hopf_polar(0).description},
      {"nonnormal_transcritical", 2, true, make_nonnormal_transcritical(0).description},
      {"modified_transcritical", 1, true, make_modified_transcritical(0).description},
      {"selkov", 4, false, make_selkov().description},
  };
}

bool is_registered(const std::string& name) {
  for (const auto& info : list_models())
    if (info.name == name) return true;
  return false;
}

ModelSystem<double> build_model(const std::string& name, int order) {
  int def = -1;
  for (const auto& info : list_models())
    if (info.name == name) def = info.default_order;
  if (def < 0) {
    std::string known;
    for (const auto& info : list_models()) known += (known.empty() ? "" : ", ") + info.name;
    throw std::invalid_argument("build_model: unknown model '" + name + "' (registry: " + known + ")");
  }
  if (order < 0) order = def;

  Model m;
  if (name == "toy_exponential") m = make_toy_exponential();
  else if (name == "saddle_node") m = make_saddle_node(order);
  else if (name == "transcritical") m = make_transcritical(order);
  else if (name == "pitchfork_super") m = make_pitchfork_super(order);
  else if (name == "pitchfork_sub") m = make_pitchfork_sub(order);
  else if (name == "hopf_polar") m = make_hopf_polar(order);
  else if (name == "nonnormal_transcritical") m = make_nonnormal_transcritical(order);
  else if (name == "modified_transcritical") m = make_modified_transcritical(order);
  else m = make_selkov();

  validate_model(m);
  return m;
}

ModelSystem<double> model_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw std::invalid_argument("custom model: document must be an object");
  Model m;
  m.name = doc.value("name", std::string("custom"));
  m.description = doc.value("description", std::string("user-defined polynomial-table system"));
  if (!doc.contains("state_dim") || !doc["state_dim"].is_number_integer())
    throw std::invalid_argument("custom model: integer 'state_dim' required");
  m.state_dim = doc["state_dim"].get<int>();

  const std::string coords = doc.value("coordinates", std::string("cartesian"));
  if (coords == "polar") m.coordinates = CoordinateKind::polar;
  else if (coords != "cartesian")
    throw std::invalid_argument("custom model: 'coordinates' must be cartesian or polar");
  if (doc.contains("angle_states"))
    for (const auto& s : doc["angle_states"]) m.angle_states.push_back(s.get<int>());

  if (!doc.contains("params") || !doc["params"].is_array() || doc["params"].empty())
    throw std::invalid_argument("custom model: non-empty 'params' array required");
  for (const auto& p : doc["params"]) {
    Parameter par;
    par.name = p.at("name").get<std::string>();
    par.value = p.value("value", 0.0);
    const std::string kind = p.value("kind", std::string("rate"));
    if (kind == "rate") par.kind = ParamKind::rate;
    else if (kind == "initial_condition") par.kind = ParamKind::initial_condition;
    else throw std::invalid_argument("custom model: parameter kind must be rate or initial_condition");
    if (par.kind == ParamKind::initial_condition) {
      if (!p.contains("state_index"))
        throw std::invalid_argument("custom model: initial-condition parameter '" + par.name +
                                    "' needs a state_index");
      par.state_index = p["state_index"].get<int>();
    }
    m.parameters.push_back(std::move(par));
  }
  const int mc = m.param_count();

  if (!doc.contains("equations") || !doc["equations"].is_array())
    throw std::invalid_argument("custom model: 'equations' array required");
  for (const auto& eq_doc : doc["equations"]) {
    std::vector<Term> eq;
    for (const auto& t_doc : eq_doc) {
      Term t;
      t.powers.assign(m.state_dim, 0);
      if (t_doc.contains("powers")) {
        const auto& pw = t_doc["powers"];
        if (static_cast<int>(pw.size()) != m.state_dim)
          throw std::invalid_argument("custom model: 'powers' must list one exponent per state");
        for (int s = 0; s < m.state_dim; ++s) t.powers[s] = pw[s].get<int>();
      }
      if (t_doc.contains("coeff")) {
        const auto& c = t_doc["coeff"];
        if (c.is_number()) {
          t.coeff = c.get<double>();
        } else if (c.is_object() && c.contains("param")) {
          const int j = m.param_index(c["param"].get<std::string>());
          if (j < 0)
            throw std::invalid_argument("custom model: coeff refers to unknown parameter '" +
                                        c["param"].get<std::string>() + "'");
          t.coeff = 1.0;
          t.param_powers.assign(mc, 0);
          t.param_powers[j] = 1;
        } else {
          throw std::invalid_argument("custom model: 'coeff' must be a number or {\"param\": name}");
        }
      }
      if (t_doc.contains("param_powers") && !t_doc["param_powers"].is_null()) {
        const auto& pp = t_doc["param_powers"];
        if (static_cast<int>(pp.size()) != mc)
          throw std::invalid_argument("custom model: 'param_powers' must list one exponent per parameter");
        if (t.param_powers.empty()) t.param_powers.assign(mc, 0);
        for (int j = 0; j < mc; ++j) t.param_powers[j] += pp[j].get<int>();
      }
      if (t_doc.contains("log_of") && !t_doc["log_of"].is_null())
        t.log_of = t_doc["log_of"].get<int>();
      eq.push_back(std::move(t));
    }
    m.equations.push_back(std::move(eq));
  }

  validate_model(m);
  return m;
}

}  // namespace twig
