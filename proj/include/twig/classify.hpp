#pragma once

#include "twig/equilibria.hpp"
#include "twig/model.hpp"
#include "twig/sweep.hpp"
#include "twig/types.hpp"

#include <optional>
#include <string>
#include <vector>

namespace twig {

enum class DirectionClass { hyperrelevant, relevant, irrelevant };

const char* to_string(DirectionClass c);

struct ClassifyOptions {
  double tail_fraction = 0.25;  // final fraction of horizons used for the slope fit
  double slope_tol = 0.4;       // |slope| below this is "relevant"; above: hyper/irrelevant
  double convergence_participation = 0.01;   // IC weight allowed in non-irrelevant directions
  double frequency_correlation_threshold = 0.9;  // phase-drift correlation for frequency flags
};

struct DirectionReport {
  int track = 0;
  DirectionClass classification = DirectionClass::relevant;
  double tail_slope = 0.0;          // d log lambda / d log t_max over the tail window
  bool floored = false;             // eigenvalue pinned at the resolution floor
  double lambda_final = 0.0;
  std::string dominant_param;
  double dominant_participation = 0.0;
  VecXd participation_final;        // per parameter, at the final horizon
  bool frequency_flag = false;
  double frequency_correlation = 0.0;  // NaN when the structural (angle) rule decided
};

struct TwigReport {
  std::vector<std::string> param_names;
  std::vector<DirectionReport> directions;  // tracked order
  int codimension_raw = 0;   // count of non-irrelevant directions
  int codimension = 0;       // codimension_raw minus frequency-flagged directions
  bool converged = false;    // initial-condition participation has left every surviving direction
  double min_overlap = 1.0;
  bool tracking_ambiguous = false;
  VecXd separatrix_normal;   // leading eigenvector at the final horizon, unit norm
  bool oscillatory = false;
  std::optional<double> period_estimate;
  std::optional<SweepFailure> failure;  // propagated from a partial sweep
};

// Classify tracked directions from the tail of the eigenvalue sweep:
// slope > +slope_tol is hyperrelevant, slope < -slope_tol is irrelevant,
// in between is relevant; floor-clamped directions are irrelevant by fiat.
// Frequency flags mark non-irrelevant directions that encode phase drift
// rather than a tunable bifurcation distance:
//   - polar systems: the direction's dominant parameter enters only
//     angle-state equations or seeds an angle state's initial condition;
//   - cartesian oscillators: |corr(J v, u)| >= threshold, where u stacks
//     t_i * f(y(t_i)) in J's row order — the signature of a pure period change.
// Requires >= 4 tail horizons; throws std::invalid_argument otherwise.
TwigReport classify(const ModelSystem<double>& model, const TwigSweep& sweep,
                    const ClassifyOptions& opt = {});

// One entry of a near-bifurcation scan: the base parameter vector with
// `offset` added to one designated parameter.
struct OffsetProfile {
  double offset = 0.0;
  VecXd horizons;
  VecXd leading_lambda;      // eigenvalue series of the direction leading at the final horizon
  double leading_tail_slope = 0.0;
  double max_local_slope_first_half = 0.0;
  std::optional<double> intermediate_regime_end;  // last horizon whose local slope >= slope_tol
  bool rising_at_final_horizon = false;           // local slope never dropped below slope_tol
  std::optional<TwigReport> report;
  std::optional<std::string> error;               // sweep failure for this offset
};

// Sweep + classify at each offset of the designated parameter, plus the
// "intermediate regime" diagnostics for the leading eigenvalue.  Per-offset
// failures are recorded, not propagated.
std::vector<OffsetProfile> near_bifurcation_profile(const ModelSystem<double>& model,
                                                    const VecXd& base_theta, int param_index,
                                                    const std::vector<double>& offsets,
                                                    const SweepOptions& sweep_opt,
                                                    const ClassifyOptions& classify_opt = {});

}  // namespace twig
