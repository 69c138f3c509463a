// Acceptance battery: one line per criterion, PASS/FAIL with the measured
// quantities that decided it.  Exit status is the number of failed criteria.

#include "twig/classify.hpp"
#include "twig/oracles.hpp"
#include "twig/registry.hpp"
#include "twig/spectrum.hpp"
#include "twig/sweep.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace {

using twig::DirectionClass;

struct Outcome {
  bool pass = false;
  std::string detail;
};

__attribute__((format(printf, 1, 2))) std::string fmt(const char* f, ...) {
  char buf[512];
  va_list args;
  va_start(args, f);
  std::vsnprintf(buf, sizeof(buf), f, args);
  va_end(args);
  return buf;
}

struct Analysis {
  twig::ModelSystem<double> model;
  twig::TwigSweep sweep;
  twig::TwigReport report;
};

Analysis analyze(const std::string& name, const std::vector<std::pair<std::string, double>>& overrides,
                 double t_min, double t_max, int count, bool recenter) {
  Analysis a;
  a.model = twig::build_model(name);
  twig::VecXd theta = a.model.default_params();
  for (const auto& [pname, value] : overrides) theta[a.model.param_index(pname)] = value;
  twig::SweepOptions opt;
  opt.horizons = twig::geometric_grid(t_min, t_max, count);
  opt.recenter = recenter;
  a.sweep = twig::run_sweep(a.model, theta, opt);
  a.report = twig::classify(a.model, a.sweep);
  return a;
}

int param_slot(const twig::TwigReport& report, const std::string& pname) {
  for (std::size_t j = 0; j < report.param_names.size(); ++j)
    if (report.param_names[j] == pname) return static_cast<int>(j);
  return -1;
}

const twig::DirectionReport& leading_direction(const twig::TwigReport& report) {
  const twig::DirectionReport* best = &report.directions.front();
  for (const auto& d : report.directions)
    if (d.lambda_final > best->lambda_final) best = &d;
  return *best;
}

std::vector<const twig::DirectionReport*> of_class(const twig::TwigReport& report,
                                                   DirectionClass c) {
  std::vector<const twig::DirectionReport*> out;
  for (const auto& d : report.directions)
    if (d.classification == c) out.push_back(&d);
  return out;
}

// ---------------------------------------------------------------------------

// Integrated sensitivities against the normal-form closed forms at the
// bifurcation point, 20 sample times, per-column relative scale.
Outcome criterion1() {
  struct Case {
    const char* name;
    twig::OracleFamily family;
    double t_max;
    std::vector<std::pair<std::string, double>> overrides;
  };
  const std::vector<Case> cases = {
      {"saddle_node", twig::OracleFamily::saddle_node, 5.0, {}},
      {"transcritical", twig::OracleFamily::transcritical, 5.0, {}},
      {"pitchfork_super", twig::OracleFamily::pitchfork_super, 5.0, {}},
      // Subcritical trajectories blow up at 1/(2 y0^2) = 0.5; stay below it.
      {"pitchfork_sub", twig::OracleFamily::pitchfork_sub, 0.4, {{"r", 0.0}, {"y0", 1.0}}},
  };

  double max_err = 0.0;
  std::string max_where;
  double saddle_r_at_1 = 0.0;
  for (const auto& c : cases) {
    const auto model = twig::build_model(c.name);
    twig::VecXd theta = model.default_params();
    for (const auto& [pname, value] : c.overrides) theta[model.param_index(pname)] = value;

    const twig::SampleGrid<double> grid(0.0, c.t_max, 20);
    twig::IntegrateOptions<double> iopt;
    iopt.abs_tol = 1e-12;
    iopt.rel_tol = 1e-10;
    const auto sens = twig::integrate_with_sensitivities<double>(model, theta, grid, std::nullopt, iopt);

    twig::OracleSpec spec;
    spec.family = c.family;
    spec.y0 = theta[model.param_count() - 1];
    const twig::VecXd times_vec = grid.times();
    const std::vector<double> times(times_vec.data(), times_vec.data() + times_vec.size());
    const int order = model.param_count() - 2;
    const twig::MatXd expected = twig::oracle_jacobian(spec, times, order);

    for (int j = 0; j < model.param_count(); ++j) {
      const double scale = std::max(expected.col(j).cwiseAbs().maxCoeff(), 1e-12);
      const double err = (sens.jacobian.col(j) - expected.col(j)).cwiseAbs().maxCoeff() / scale;
      if (err > max_err) {
        max_err = err;
        max_where = std::string(c.name) + "/" + model.parameters[static_cast<std::size_t>(j)].name;
      }
    }
    if (c.family == twig::OracleFamily::saddle_node)
      for (Eigen::Index i = 0; i < times_vec.size(); ++i)
        if (std::fabs(times_vec[i] - 1.0) < 1e-9) saddle_r_at_1 = sens.jacobian(i, 0);
  }

  const double seven_twelfths_err = std::fabs(saddle_r_at_1 - 7.0 / 12.0);
  Outcome o;
  o.pass = max_err <= 1e-6 && seven_twelfths_err <= 1e-7;
  o.detail = fmt("four normal forms vs closed-form sensitivities at 20 times: "
                 "max column rel err %.2e (%s); saddle d y/d r(1) = %.9f vs 7/12",
                 max_err, max_where.c_str(), saddle_r_at_1);
  return o;
}

// Critical supercritical pitchfork: a single surviving direction owned by r,
// initial condition washed out, codimension one.
Outcome criterion2() {
  const auto a = analyze("pitchfork_super", {}, 1e-2, 1e3, 60, false);
  std::vector<const twig::DirectionReport*> surviving;
  for (const auto& d : a.report.directions)
    if (d.classification != DirectionClass::irrelevant) surviving.push_back(&d);

  const int r_slot = param_slot(a.report, "r");
  const double r_part = surviving.size() == 1 ? surviving[0]->participation_final[r_slot] : 0.0;
  Outcome o;
  o.pass = surviving.size() == 1 && r_part >= 0.99 && a.report.converged &&
           a.report.codimension == 1;
  o.detail = fmt("supercritical pitchfork: %zu non-irrelevant direction(s), r participation %.4f, "
                 "converged=%s, codimension %d",
                 surviving.size(), r_part, a.report.converged ? "true" : "false",
                 a.report.codimension);
  return o;
}

// Transcritical: the leading eigenvalue plateaus (relevant, not
// hyperrelevant) while every other direction decays.
Outcome criterion3() {
  const auto a = analyze("transcritical", {}, 1e-2, 1e3, 60, false);
  const auto& lead = leading_direction(a.report);
  double worst_other = -1e300;  // largest (least negative) non-leading slope
  for (const auto& d : a.report.directions)
    if (&d != &lead) worst_other = std::max(worst_other, d.tail_slope);

  Outcome o;
  o.pass = std::fabs(lead.tail_slope) <= 0.15 && lead.classification == DirectionClass::relevant &&
           worst_other < -0.15;
  o.detail = fmt("transcritical: leading tail slope %+.3f (relevant), "
                 "all other slopes <= %+.3f",
                 lead.tail_slope, worst_other);
  return o;
}

// Hopf: two rising directions; the omega one is recognized as pure frequency,
// leaving codimension one for mu.
Outcome criterion4() {
  const auto a = analyze("hopf_polar", {}, 1e-2, 1e3, 60, false);
  const auto rising = of_class(a.report, DirectionClass::hyperrelevant);
  const twig::DirectionReport* omega_dir = nullptr;
  const twig::DirectionReport* mu_dir = nullptr;
  for (const auto* d : rising) {
    if (d->dominant_param == "omega") omega_dir = d;
    if (d->dominant_param == "mu") mu_dir = d;
  }
  Outcome o;
  o.pass = rising.size() == 2 && omega_dir != nullptr && mu_dir != nullptr &&
           omega_dir->dominant_participation >= 0.9 && omega_dir->frequency_flag &&
           mu_dir->dominant_participation >= 0.9 && a.report.codimension == 1;
  o.detail = fmt("hopf: %zu rising directions (omega part %.3f flagged=%s, mu part %.3f), "
                 "codimension %d",
                 rising.size(), omega_dir ? omega_dir->dominant_participation : 0.0,
                 omega_dir && omega_dir->frequency_flag ? "true" : "false",
                 mu_dir ? mu_dir->dominant_participation : 0.0, a.report.codimension);
  return o;
}

// Slightly off criticality the leading eigenvalue first rises as if critical,
// then either relaxes to a plateau (above) or decays (below).
Outcome criterion5() {
  const auto model = twig::build_model("pitchfork_super");
  twig::SweepOptions opt;
  opt.horizons = twig::geometric_grid(1e-2, 1e4, 65);
  const auto profiles = twig::near_bifurcation_profile(model, model.default_params(),
                                                       model.param_index("r"), {0.01, -0.01}, opt);
  const auto& above = profiles[0];
  const auto& below = profiles[1];
  const bool rises = !above.error && !below.error &&
                     above.max_local_slope_first_half >= 0.4 &&
                     below.max_local_slope_first_half >= 0.4;
  Outcome o;
  o.pass = rises && std::fabs(above.leading_tail_slope) < 0.2 && below.leading_tail_slope < -0.2;
  o.detail = fmt("pitchfork at r = +/-0.01: intermediate local slopes %.2f/%.2f, "
                 "tail slopes %+.3f (flattens) / %+.3f (decays)",
                 above.max_local_slope_first_half, below.max_local_slope_first_half,
                 above.leading_tail_slope, below.leading_tail_slope);
  return o;
}

// Subcritical pitchfork just below threshold: finite trajectories, and the
// leading direction still belongs to r.
Outcome criterion6() {
  const auto a = analyze("pitchfork_sub", {}, 1e-2, 1e3, 60, false);
  const auto& lead = leading_direction(a.report);
  Outcome o;
  o.pass = !a.sweep.failure && lead.dominant_param == "r" && lead.dominant_participation >= 0.9;
  o.detail = fmt("subcritical pitchfork: sweep %s, leading direction dominated by %s "
                 "with participation %.4f",
                 a.sweep.failure ? "diverged" : "completed", lead.dominant_param.c_str(),
                 lead.dominant_participation);
  return o;
}

// Logarithmic transcritical variant at criticality: one surviving direction,
// firmly owned by r.
Outcome criterion7() {
  const auto a = analyze("nonnormal_transcritical", {}, 1e-2, 1e3, 60, false);
  std::vector<const twig::DirectionReport*> surviving;
  for (const auto& d : a.report.directions)
    if (d.classification != DirectionClass::irrelevant) surviving.push_back(&d);
  const int r_slot = param_slot(a.report, "r");
  const bool one = surviving.size() == 1;
  const double slope = one ? surviving[0]->tail_slope : 0.0;
  const double r_part = one ? surviving[0]->participation_final[r_slot] : 0.0;
  Outcome o;
  o.pass = one && slope > -0.1 && r_part >= 0.95 && a.report.codimension == 1;
  o.detail = fmt("logarithmic transcritical: %zu non-decreasing direction(s), tail slope %+.3f, "
                 "r participation %.4f, codimension %d",
                 surviving.size(), slope, r_part, a.report.codimension);
  return o;
}

// Shifted variant: the fixed-point location parameter alpha becomes
// hyperrelevant next to the relevant r direction; codimension two.
Outcome criterion8() {
  const auto a = analyze("modified_transcritical", {}, 1e-2, 1e3, 60, false);
  const twig::DirectionReport* alpha_dir = nullptr;
  const twig::DirectionReport* r_dir = nullptr;
  for (const auto& d : a.report.directions) {
    if (d.classification == DirectionClass::hyperrelevant && d.dominant_param == "alpha")
      alpha_dir = &d;
    if (d.classification == DirectionClass::relevant && d.dominant_param == "r") r_dir = &d;
  }
  Outcome o;
  o.pass = alpha_dir != nullptr && r_dir != nullptr &&
           alpha_dir->dominant_participation >= 0.9 && r_dir->dominant_participation >= 0.9 &&
           a.report.codimension == 2;
  o.detail = fmt("shifted transcritical: alpha hyperrelevant (part %.4f), r relevant (part %.4f), "
                 "codimension %d",
                 alpha_dir ? alpha_dir->dominant_participation : 0.0,
                 r_dir ? r_dir->dominant_participation : 0.0, a.report.codimension);
  return o;
}

// Glycolytic oscillator on its limit cycle: the c4 nuisance direction grows
// but is recognized as frequency drift, leaving codimension one.
Outcome criterion9() {
  const auto a = analyze("selkov", {}, 1e-2, 1e5, 75, true);
  const twig::DirectionReport* c4_dir = nullptr;
  for (const auto& d : a.report.directions)
    if (d.classification == DirectionClass::hyperrelevant && d.dominant_param == "c4" &&
        d.frequency_flag)
      c4_dir = &d;
  Outcome o;
  o.pass = c4_dir != nullptr && a.report.codimension == 1 && a.report.oscillatory;
  o.detail = fmt("glycolytic oscillator: frequency-flagged hyperrelevant c4 direction %s "
                 "(participation %.3f), oscillatory=%s, codimension %d",
                 c4_dir ? "found" : "missing", c4_dir ? c4_dir->dominant_participation : 0.0,
                 a.report.oscillatory ? "true" : "false", a.report.codimension);
  return o;
}

// Property battery: spectrum positivity and normalization, SVD route vs the
// explicit Gram matrix, scaling invariance of the classification, and
// finite-difference agreement for every registry model.
Outcome criterion10() {
  // Positivity and participation normalization on two real sweeps.
  double worst_sum_dev = 0.0;
  double min_lambda = 1e300;
  const auto toy = analyze("toy_exponential", {}, 1e-2, 1e3, 12, false);
  auto trans = analyze("transcritical", {}, 1e-2, 1e2, 10, false);
  const Analysis* checked[] = {&toy, &trans};
  for (const Analysis* a : checked)
    for (const auto& s : a->sweep.spectra) {
      min_lambda = std::min(min_lambda, s.eigenvalues.minCoeff());
      for (Eigen::Index k = 0; k < s.participation.cols(); ++k)
        worst_sum_dev = std::max(worst_sum_dev, std::fabs(s.participation.col(k).sum() - 1.0));
    }

  // SVD spectrum vs an eigendecomposition of J^T J on random Jacobians.
  std::mt19937 rng(42);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double worst_gram = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    twig::MatXd J(5, 5);
    for (Eigen::Index i = 0; i < 5; ++i)
      for (Eigen::Index j = 0; j < 5; ++j) J(i, j) = u(rng);
    const auto s = twig::fim_spectrum(J, 1.0);
    Eigen::SelfAdjointEigenSolver<twig::MatXd> es(J.transpose() * J);
    for (Eigen::Index k = 0; k < 5; ++k)
      worst_gram = std::max(worst_gram, std::fabs(s.eigenvalues[k] - es.eigenvalues()[4 - k]));
  }

  // Uniform Jacobian scaling (J -> 2.5 J) must not move any label.
  const auto base_report = trans.report;
  for (auto& s : trans.sweep.spectra) {
    s.eigenvalues *= 6.25;
    s.singular_values *= 2.5;
  }
  trans.sweep.final_jacobian *= 2.5;
  const auto scaled_report = twig::classify(trans.model, trans.sweep);
  bool scaling_ok = scaled_report.directions.size() == base_report.directions.size();
  for (std::size_t k = 0; scaling_ok && k < base_report.directions.size(); ++k)
    scaling_ok = base_report.directions[k].classification ==
                     scaled_report.directions[k].classification &&
                 base_report.directions[k].dominant_param ==
                     scaled_report.directions[k].dominant_param;

  // Finite differences vs the sensitivity route, every registry model.
  twig::IntegrateOptions<double> iopt;
  iopt.abs_tol = 1e-12;
  iopt.rel_tol = 1e-10;
  double worst_fd = 0.0;
  std::string worst_fd_where;
  for (const auto& info : twig::list_models()) {
    const auto model = twig::build_model(info.name);
    const twig::VecXd theta = model.default_params();
    for (const double t_max : {1.0, 10.0}) {
      const twig::SampleGrid<double> grid(0.0, t_max, 20);
      double err = 0.0;
      if (model.has_rhs()) {
        const auto sens =
            twig::integrate_with_sensitivities<double>(model, theta, grid, std::nullopt, iopt);
        const auto fd = twig::finite_difference_jacobian(model, theta, grid, iopt);
        // Floor sits above the ~1e-10 finite-difference noise so exactly-zero
        // sensitivities are not misread as relative error 1.
        const double floor = std::max(1e-10, 1e-5 * sens.jacobian.array().abs().maxCoeff());
        for (Eigen::Index i = 0; i < sens.jacobian.rows(); ++i)
          for (Eigen::Index j = 0; j < sens.jacobian.cols(); ++j) {
            const double a = sens.jacobian(i, j), b = fd.jacobian(i, j);
            err = std::max(err, std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), floor}));
          }
      } else {
        // Closed-form model: finite differences against exact derivatives.
        const twig::VecXd times_vec = grid.times();
        const std::vector<double> times(times_vec.data(), times_vec.data() + times_vec.size());
        const auto fd = twig::sample_closed_form(model, theta, times);
        for (Eigen::Index i = 0; i < times_vec.size(); ++i) {
          const double t = times_vec[i];
          const double exact[] = {1.0, -t * std::exp(-theta[1] * t), t * std::exp(theta[2] * t)};
          for (Eigen::Index j = 0; j < 3; ++j) {
            const double mag = std::max({std::fabs(exact[j]), std::fabs(fd.jacobian(i, j)), 1e-8});
            err = std::max(err, std::fabs(fd.jacobian(i, j) - exact[j]) / mag);
          }
        }
      }
      if (err > worst_fd) {
        worst_fd = err;
        worst_fd_where = info.name + fmt(" at t_max %g", t_max);
      }
    }
  }

  Outcome o;
  o.pass = min_lambda >= 0.0 && worst_sum_dev <= 1e-12 && worst_gram <= 1e-8 && scaling_ok &&
           worst_fd <= 1e-4;
  o.detail = fmt("properties: min eigenvalue %.1e, participation sum dev %.1e, "
                 "Gram agreement %.1e, scaling labels %s, FD agreement %.1e (%s)",
                 min_lambda, worst_sum_dev, worst_gram, scaling_ok ? "stable" : "CHANGED",
                 worst_fd, worst_fd_where.c_str());
  return o;
}

// Closed-form three-exponential model: growing, constant and dying terms land
// in the three classes.
Outcome criterion11() {
  const auto a = analyze("toy_exponential", {}, 1e-2, 1e3, 60, false);
  const twig::DirectionReport* by_param[3] = {nullptr, nullptr, nullptr};
  for (const auto& d : a.report.directions) {
    if (d.dominant_param == "theta1") by_param[0] = &d;
    if (d.dominant_param == "theta2") by_param[1] = &d;
    if (d.dominant_param == "theta3") by_param[2] = &d;
  }
  Outcome o;
  o.pass = by_param[0] && by_param[1] && by_param[2] &&
           by_param[2]->classification == DirectionClass::hyperrelevant &&
           by_param[0]->classification == DirectionClass::relevant &&
           by_param[1]->classification == DirectionClass::irrelevant;
  o.detail = fmt("closed-form exponentials: theta3 %s, theta1 %s, theta2 %s",
                 by_param[2] ? twig::to_string(by_param[2]->classification) : "missing",
                 by_param[0] ? twig::to_string(by_param[0]->classification) : "missing",
                 by_param[1] ? twig::to_string(by_param[1]->classification) : "missing");
  return o;
}

}  // namespace

int main() {
  Outcome (*criteria[])() = {criterion1, criterion2, criterion3, criterion4,
                             criterion5, criterion6, criterion7, criterion8,
                             criterion9, criterion10, criterion11};
  int failures = 0;
  for (std::size_t i = 0; i < std::size(criteria); ++i) {
    Outcome o;
    try {
      o = criteria[i]();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    if (!o.pass) ++failures;
    std::printf("criterion %2zu: %s — %s\n", i + 1, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("acceptance: %zu/%zu criteria passed\n", std::size(criteria) - failures,
              std::size(criteria));
  return failures;
}
