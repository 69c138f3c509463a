#include "twig/classify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace twig {

const char* to_string(DirectionClass c) {
  switch (c) {
    case DirectionClass::hyperrelevant: return "hyperrelevant";
    case DirectionClass::relevant: return "relevant";
    case DirectionClass::irrelevant: return "irrelevant";
  }
  return "unknown";
}

namespace {

double least_squares_slope(const VecXd& x, const VecXd& y) {
  const double xm = x.mean();
  const double ym = y.mean();
  double num = 0.0, den = 0.0;
  for (int i = 0; i < x.size(); ++i) {
    num += (x[i] - xm) * (y[i] - ym);
    den += (x[i] - xm) * (x[i] - xm);
  }
  return num / den;
}

double pearson_abs(const VecXd& a, const VecXd& b) {
  const VecXd da = a.array() - a.mean();
  const VecXd db = b.array() - b.mean();
  const double na = da.norm();
  const double nb = db.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::abs(da.dot(db)) / (na * nb);
}

// Does parameter j touch only angle-state equations (or seed an angle state)?
// Such parameters reparameterize phase, not the distance to a bifurcation.
bool angle_only_parameter(const ModelSystem<double>& model, int j) {
  const Parameter& p = model.parameters[j];
  if (p.kind == ParamKind::initial_condition) return model.is_angle_state(p.state_index);
  bool anywhere = false;
  for (int s = 0; s < model.state_dim; ++s) {
    for (const auto& term : model.equations[s]) {
      if (term.param_powers.empty() || term.param_powers[j] == 0) continue;
      anywhere = true;
      if (!model.is_angle_state(s)) return false;
    }
  }
  return anywhere;
}

}  // namespace

TwigReport classify(const ModelSystem<double>& model, const TwigSweep& sweep,
                    const ClassifyOptions& opt) {
  const int H = static_cast<int>(sweep.spectra.size());
  if (H < 4) throw std::invalid_argument("classify: insufficient tail points (need >= 4 horizons)");
  const int m = static_cast<int>(sweep.param_names.size());
  int ntail = static_cast<int>(std::ceil(opt.tail_fraction * H));
  ntail = std::max(4, std::min(ntail, H));

  TwigReport rep;
  rep.param_names = sweep.param_names;
  rep.min_overlap = sweep.min_overlap;
  rep.tracking_ambiguous = sweep.tracking_ambiguous;
  rep.failure = sweep.failure;

  VecXd log_t(ntail);
  for (int s = 0; s < ntail; ++s) log_t[s] = std::log(sweep.horizons[H - ntail + s]);

  const FimSpectrum<double>& final_sp = sweep.spectra.back();

  // Oscillation state of the underlying trajectory (polar systems are viewed
  // in the plane, where rotation shows up as sign changes).
  const OscillationResult osc = detect_oscillation(
      oscillation_view(model, sweep.final_states_raw), sweep.final_grid);
  rep.oscillatory = osc.oscillatory;
  rep.period_estimate = osc.period_estimate;

  // Phase-drift template u = t_i * f(y(t_i)) stacked in J's row order: a pure
  // frequency change shifts the trajectory by epsilon * t * f(y) to first
  // order, so directions whose response J v matches u encode period, not
  // bifurcation distance.
  VecXd drift;
  const bool cartesian_osc_rule =
      osc.oscillatory && model.coordinates == CoordinateKind::cartesian && model.has_rhs();
  if (cartesian_osc_rule) {
    const int n = model.state_dim;
    const VecXd times = sweep.final_grid.times();
    drift.resize(static_cast<Eigen::Index>(sweep.final_grid.n_samples) * n);
    for (int i = 0; i < sweep.final_grid.n_samples; ++i) {
      const VecXd f = eval_rhs(model, VecXd(sweep.final_states_raw.row(i)), sweep.theta);
      for (int k = 0; k < n; ++k) drift[static_cast<Eigen::Index>(i) * n + k] = times[i] * f[k];
    }
  }

  int flagged = 0;
  for (int k = 0; k < m; ++k) {
    DirectionReport d;
    d.track = k;
    d.lambda_final = final_sp.eigenvalues[k];
    d.floored = final_sp.floored[k];
    d.participation_final = final_sp.participation.col(k);
    Eigen::Index jmax = 0;
    d.dominant_participation = d.participation_final.maxCoeff(&jmax);
    d.dominant_param = sweep.param_names[static_cast<int>(jmax)];
    d.frequency_correlation = std::numeric_limits<double>::quiet_NaN();

    VecXd log_lambda(ntail);
    for (int s = 0; s < ntail; ++s) log_lambda[s] = std::log(sweep.spectra[H - ntail + s].eigenvalues[k]);
    d.tail_slope = least_squares_slope(log_t, log_lambda);

    if (d.floored)
      d.classification = DirectionClass::irrelevant;
    else if (d.tail_slope > opt.slope_tol)
      d.classification = DirectionClass::hyperrelevant;
    else if (d.tail_slope < -opt.slope_tol)
      d.classification = DirectionClass::irrelevant;
    else
      d.classification = DirectionClass::relevant;

    if (d.classification != DirectionClass::irrelevant && osc.oscillatory) {
      if (model.coordinates == CoordinateKind::polar) {
        d.frequency_flag = angle_only_parameter(model, static_cast<int>(jmax));
      } else if (cartesian_osc_rule) {
        d.frequency_correlation = pearson_abs(sweep.final_jacobian * final_sp.eigenvectors.col(k), drift);
        d.frequency_flag = d.frequency_correlation >= opt.frequency_correlation_threshold;
      }
      if (d.frequency_flag) ++flagged;
    }
    rep.directions.push_back(std::move(d));
  }

  for (const auto& d : rep.directions)
    if (d.classification != DirectionClass::irrelevant) ++rep.codimension_raw;
  rep.codimension = rep.codimension_raw - flagged;

  // Converged when no surviving (non-irrelevant) direction retains more than a
  // trace of any initial-condition parameter: the transient has left the FIM.
  rep.converged = true;
  for (int j = 0; j < m; ++j) {
    if (model.parameters[j].kind != ParamKind::initial_condition) continue;
    for (const auto& d : rep.directions) {
      if (d.classification == DirectionClass::irrelevant) continue;
      if (d.participation_final[j] >= opt.convergence_participation) rep.converged = false;
    }
  }

  Eigen::Index lead = 0;
  final_sp.eigenvalues.maxCoeff(&lead);
  rep.separatrix_normal = final_sp.eigenvectors.col(lead);
  return rep;
}

std::vector<OffsetProfile> near_bifurcation_profile(const ModelSystem<double>& model,
                                                    const VecXd& base_theta, int param_index,
                                                    const std::vector<double>& offsets,
                                                    const SweepOptions& sweep_opt,
                                                    const ClassifyOptions& classify_opt) {
  if (param_index < 0 || param_index >= model.param_count())
    throw std::invalid_argument("near_bifurcation_profile: parameter index out of range");
  std::vector<OffsetProfile> out(offsets.size());
  for (size_t o = 0; o < offsets.size(); ++o) {
    OffsetProfile& prof = out[o];
    prof.offset = offsets[o];
    VecXd theta = base_theta;
    theta[param_index] += offsets[o];
    try {
      const TwigSweep sweep = run_sweep(model, theta, sweep_opt);
      prof.report = classify(model, sweep, classify_opt);
      prof.horizons = sweep.horizons;

      const int H = static_cast<int>(sweep.horizons.size());
      Eigen::Index lead = 0;
      sweep.spectra.back().eigenvalues.maxCoeff(&lead);
      prof.leading_lambda.resize(H);
      for (int s = 0; s < H; ++s) prof.leading_lambda[s] = sweep.spectra[s].eigenvalues[lead];
      prof.leading_tail_slope = prof.report->directions[static_cast<int>(lead)].tail_slope;

      double max_first_half = -std::numeric_limits<double>::infinity();
      std::optional<double> regime_end;
      bool rising_last = false;
      for (int j = 0; j + 1 < H; ++j) {
        const double slope = (std::log(prof.leading_lambda[j + 1]) - std::log(prof.leading_lambda[j])) /
                             (std::log(sweep.horizons[j + 1]) - std::log(sweep.horizons[j]));
        if (j < H / 2) max_first_half = std::max(max_first_half, slope);
        if (slope >= classify_opt.slope_tol) {
          regime_end = sweep.horizons[j + 1];
          rising_last = (j + 2 == H);
        }
      }
      prof.max_local_slope_first_half = max_first_half;
      prof.intermediate_regime_end = regime_end;
      prof.rising_at_final_horizon = rising_last;
    } catch (const std::exception& e) {
      prof.error = e.what();
    }
  }
  return out;
}

}  // namespace twig
