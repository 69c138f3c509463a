#pragma once

#include "twig/model.hpp"
#include "twig/sensitivity.hpp"
#include "twig/spectrum.hpp"
#include "twig/types.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace twig {

struct SweepOptions {
  VecXd horizons;        // geometric t_max grid, >= 8 points
  int n_samples = 50;
  bool recenter = false;
  double floor_rel = 1e-12;
  int max_threads = 0;   // 0: TWIG_THREADS env var, else hardware concurrency
  IntegrateOptions<double> integrate;
};

struct SweepFailure {
  double t_max = 0.0;      // first horizon that could not be completed
  std::string message;
};

// FIM spectra over a widening-horizon sweep with eigendirection tracking.
// Spectra columns are permuted into tracked order: index k means the same
// continued direction at every horizon; `tracking[s][k]` records which
// descending-eigenvalue column of horizon s that is.
struct TwigSweep {
  VecXd horizons;                            // completed horizons, ascending
  std::vector<FimSpectrum<double>> spectra;  // one per completed horizon, tracked order
  std::vector<std::vector<int>> tracking;
  double min_overlap = 1.0;                  // worst adjacent-horizon match
  bool tracking_ambiguous = false;           // min_overlap < 1/sqrt(m)
  std::vector<std::string> param_names;
  VecXd theta;                               // parameter vector the sweep was run at

  // Final-horizon data consumed by classification.
  SampleGrid<double> final_grid;
  MatXd final_states_raw;   // unrecentered samples (oscillation + drift analysis)
  MatXd final_jacobian;     // J at the final horizon (recentered when requested)
  std::optional<VecXd> recenter_fixed_point;

  std::optional<SweepFailure> failure;  // set when later horizons diverged (partial sweep)
};

// Worker-pool helper: runs body(0..n-1), at most max_threads at a time
// (<=0 selects default_thread_count()).  Results must be written to
// index-addressed slots so concurrent and sequential execution agree.
int default_thread_count();
void parallel_for(int n, const std::function<void(int)>& body, int max_threads = 0);

// Sweep t_max over opt.horizons for one model at one parameter vector.
// A single sensitivity integration covers the union of all horizon grids;
// per-horizon Jacobians are row subsets, so shared sample times contribute
// identical entries at every horizon.  When recentering is requested the
// fixed point comes from the equilibria module (interior fixed point if the
// trajectory oscillates) and its parameter dependence is subtracted from J.
// Divergence part-way up the horizon ladder yields a partial sweep with
// `failure` set; a sweep with no completable horizon throws IntegrationError.
TwigSweep run_sweep(const ModelSystem<double>& model, const VecXd& theta, const SweepOptions& opt);

}  // namespace twig
