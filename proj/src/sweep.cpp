#include "twig/sweep.hpp"

#include "twig/equilibria.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <thread>

namespace twig {

int default_thread_count() {
  if (const char* env = std::getenv("TWIG_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && v >= 1) return static_cast<int>(std::min(v, 256L));
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw ? static_cast<int>(hw) : 1;
}

void parallel_for(int n, const std::function<void(int)>& body, int max_threads) {
  int nt = max_threads > 0 ? max_threads : default_thread_count();
  nt = std::min(nt, n);
  if (nt <= 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= n) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(nt);
  for (int t = 0; t < nt; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

namespace {

struct MergedGrid {
  std::vector<double> times;             // ascending, unique
  std::vector<std::vector<int>> rows;    // rows[h][i] = row index of horizon h's sample i
};

MergedGrid merge_grids(const VecXd& horizons, int n_samples) {
  MergedGrid mg;
  for (int h = 0; h < horizons.size(); ++h) {
    const VecXd t = SampleGrid<double>(0.0, horizons[h], n_samples).times();
    mg.times.insert(mg.times.end(), t.data(), t.data() + t.size());
  }
  std::sort(mg.times.begin(), mg.times.end());
  mg.times.erase(std::unique(mg.times.begin(), mg.times.end()), mg.times.end());
  mg.rows.resize(horizons.size());
  for (int h = 0; h < horizons.size(); ++h) {
    const VecXd t = SampleGrid<double>(0.0, horizons[h], n_samples).times();
    mg.rows[h].resize(n_samples);
    for (int i = 0; i < n_samples; ++i) {
      const auto it = std::lower_bound(mg.times.begin(), mg.times.end(), t[i]);
      mg.rows[h][i] = static_cast<int>(it - mg.times.begin());
    }
  }
  return mg;
}

// Recentering target: the interior fixed point when the trajectory orbits,
// otherwise Newton from the trajectory's final sample.
Recenter<double> make_recenter(const ModelSystem<double>& model, const VecXd& theta,
                               const SweepOptions& opt) {
  if (!model.has_rhs())
    throw std::invalid_argument("run_sweep: recentering requires a dynamical model");
  const SampleGrid<double> grid(0.0, opt.horizons[opt.horizons.size() - 1], opt.n_samples);
  const VecXd tvec = grid.times();
  const std::vector<double> times(tvec.data(), tvec.data() + tvec.size());
  MatXd traj;
  auto rhs = [&](double t, const VecXd& y, VecXd& dy) { dy = eval_rhs(model, y, theta, t); };
  integrate_dense(rhs, model.initial_state(theta), 0.0, times.back(), times, traj, opt.integrate);

  FixedPoint<double> fp;
  if (detect_oscillation(oscillation_view(model, traj), grid).oscillatory)
    fp = interior_fixed_point(model, theta, traj, grid).fixed_point;
  else
    fp = find_fixed_point(model, theta, VecXd(traj.row(traj.rows() - 1)));

  Recenter<double> rc;
  rc.fixed_point = fp.location;
  rc.fixed_point_jacobian = fixed_point_jacobian(model, theta, fp.location);
  return rc;
}

}  // namespace

TwigSweep run_sweep(const ModelSystem<double>& model, const VecXd& theta, const SweepOptions& opt) {
  const int H_all = static_cast<int>(opt.horizons.size());
  if (H_all < 8) throw std::invalid_argument("run_sweep: need at least 8 horizons");
  for (int h = 0; h < H_all; ++h) {
    if (!(opt.horizons[h] > 0)) throw std::invalid_argument("run_sweep: horizons must be positive");
    if (h > 0 && !(opt.horizons[h] > opt.horizons[h - 1]))
      throw std::invalid_argument("run_sweep: horizons must ascend");
  }
  if (opt.n_samples < 4) throw std::invalid_argument("run_sweep: need at least 4 samples");
  const int m = model.param_count();
  const int n = model.state_dim;
  if (static_cast<long>(opt.n_samples) * n < m)
    throw std::invalid_argument(
        "run_sweep: n_samples * state_dim must reach the parameter count for a full spectrum");
  if (theta.size() != m) throw std::invalid_argument("run_sweep: parameter vector has wrong length");

  TwigSweep sw;
  sw.theta = theta;
  for (const auto& p : model.parameters) sw.param_names.push_back(p.name);

  std::optional<Recenter<double>> recenter;
  if (opt.recenter) recenter = make_recenter(model, theta, opt);

  // One integration spanning every horizon; on divergence, retry with the
  // horizons that fit below the failure time and report a partial sweep.
  VecXd horizons = opt.horizons;
  MergedGrid mg = merge_grids(horizons, opt.n_samples);
  SampledJacobian<double> samples;
  for (;;) {
    try {
      samples = sample_sensitivities(model, theta, 0.0, mg.times, opt.integrate);
      break;
    } catch (const IntegrationError& e) {
      int keep = 0;
      while (keep < horizons.size() && horizons[keep] < e.time()) ++keep;
      if (keep == 0) throw;  // nothing completable
      sw.failure = SweepFailure{horizons[keep], e.what()};
      horizons = horizons.head(keep).eval();
      mg = merge_grids(horizons, opt.n_samples);
    }
  }

  // Per-horizon row slices; closed-form models can overflow at some horizon
  // without an integrator error, so truncate at the first non-finite slice.
  const int H = static_cast<int>(horizons.size());
  std::vector<MatXd> jac(H), states(H);
  int completed = H;
  for (int h = 0; h < H; ++h) {
    MatXd J(static_cast<Eigen::Index>(opt.n_samples) * n, m);
    MatXd Y(opt.n_samples, n);
    for (int i = 0; i < opt.n_samples; ++i) {
      const int row = mg.rows[h][i];
      Y.row(i) = samples.states.row(row);
      J.middleRows(static_cast<Eigen::Index>(i) * n, n) =
          samples.jacobian.middleRows(static_cast<Eigen::Index>(row) * n, n);
    }
    if (!J.allFinite() || !Y.allFinite()) {
      sw.failure = SweepFailure{horizons[h], "non-finite samples at t_max=" +
                                                 std::to_string(horizons[h])};
      completed = h;
      break;
    }
    states[h] = std::move(Y);
    jac[h] = std::move(J);
  }
  if (completed == 0)
    throw IntegrationError(IntegrationFailure::divergence, horizons[0],
                           "no horizon produced finite samples");

  sw.horizons = horizons.head(completed).eval();
  sw.final_grid = SampleGrid<double>(0.0, sw.horizons[completed - 1], opt.n_samples);
  sw.final_states_raw = states[completed - 1];

  if (recenter) {
    sw.recenter_fixed_point = recenter->fixed_point;
    const MatXd& fpJ = *recenter->fixed_point_jacobian;
    for (int h = 0; h < completed; ++h) {
      states[h].rowwise() -= recenter->fixed_point.transpose();
      for (int i = 0; i < opt.n_samples; ++i)
        jac[h].middleRows(static_cast<Eigen::Index>(i) * n, n) -= fpJ;
    }
  }
  sw.final_jacobian = jac[completed - 1];

  sw.spectra.resize(completed);
  parallel_for(
      completed,
      [&](int h) {
        try {
          sw.spectra[h] = fim_spectrum(jac[h], sw.horizons[h], opt.floor_rel);
        } catch (const std::exception& e) {
          throw std::runtime_error("spectrum at t_max=" + std::to_string(sw.horizons[h]) +
                                   ": " + e.what());
        }
      },
      opt.max_threads);

  // Track directions across horizons by greedy maximal overlap; permute every
  // spectrum into tracked order so index k always means the same direction.
  sw.tracking.resize(completed);
  sw.tracking[0].resize(m);
  for (int k = 0; k < m; ++k) sw.tracking[0][k] = k;
  for (int s = 1; s < completed; ++s) {
    const MatXd overlap =
        (sw.spectra[s - 1].eigenvectors.transpose() * sw.spectra[s].eigenvectors).cwiseAbs();
    std::vector<int> perm(m, -1);
    std::vector<bool> row_used(m, false), col_used(m, false);
    for (int pick = 0; pick < m; ++pick) {
      int best_r = -1, best_c = -1;
      double best = -1.0;
      for (int r = 0; r < m; ++r) {
        if (row_used[r]) continue;
        for (int c = 0; c < m; ++c) {
          if (col_used[c]) continue;
          if (overlap(r, c) > best) {
            best = overlap(r, c);
            best_r = r;
            best_c = c;
          }
        }
      }
      perm[best_r] = best_c;
      row_used[best_r] = true;
      col_used[best_c] = true;
      sw.min_overlap = std::min(sw.min_overlap, best);
    }

    FimSpectrum<double>& sp = sw.spectra[s];
    FimSpectrum<double> tracked = sp;
    sw.tracking[s].resize(m);
    for (int k = 0; k < m; ++k) {
      const int c = perm[k];
      sw.tracking[s][k] = c;  // raw (descending-eigenvalue) column serving track k here
      tracked.eigenvalues[k] = sp.eigenvalues[c];
      tracked.singular_values[k] = sp.singular_values[c];
      tracked.eigenvectors.col(k) = sp.eigenvectors.col(c);
      tracked.participation.col(k) = sp.participation.col(c);
      tracked.floored[k] = sp.floored[c];
    }
    sp = std::move(tracked);
  }
  sw.tracking_ambiguous = sw.min_overlap < 1.0 / std::sqrt(static_cast<double>(m));
  return sw;
}

}  // namespace twig
