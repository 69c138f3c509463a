#pragma once

#include "twig/integrate.hpp"
#include "twig/model.hpp"
#include "twig/types.hpp"

#include <cmath>
#include <optional>
#include <vector>

namespace twig {

// Sampled trajectory plus the sensitivity matrix J with entries
// d y_k(t_i) / d theta_j, rows ordered sample-major: row = i * n_obs + k.
template <class Scalar = double>
struct TrajectoryJacobian {
  SampleGrid<Scalar> grid;
  MatrixX<Scalar> states;                // n_samples x n_state (recentered when requested)
  MatrixX<Scalar> jacobian;              // (n_samples * n_obs) x m
  std::vector<int> observed_components;  // which states are observed (default: all)
  std::optional<VectorX<Scalar>> recenter_offset;  // fixed point subtracted, if any

  [[nodiscard]] int n_obs() const { return static_cast<int>(observed_components.size()); }
};

// Recentering request: subtract `fixed_point` from every sampled state; when
// `fixed_point_jacobian` (d fp / d theta, n x m) is present, subtract it from
// the sensitivities as well, so parameters that merely relocate the fixed
// point stop registering as persistently relevant.
template <class Scalar = double>
struct Recenter {
  VectorX<Scalar> fixed_point;
  std::optional<MatrixX<Scalar>> fixed_point_jacobian;
};

// States and sensitivities sampled at arbitrary ascending times.
template <class Scalar = double>
struct SampledJacobian {
  MatrixX<Scalar> states;    // n_times x n_state
  MatrixX<Scalar> jacobian;  // (n_times * n_state) x m, rows sample-major
};

namespace detail {

template <class Scalar>
std::vector<int> all_components(int n) {
  std::vector<int> v(n);
  for (int i = 0; i < n; ++i) v[i] = i;
  return v;
}

}  // namespace detail

// Closed-form models are sampled directly; sensitivities come from central
// finite differences in theta (step 1e-6 * (1 + |theta_j|)).
template <class Scalar = double>
SampledJacobian<Scalar> sample_closed_form(const ModelSystem<Scalar>& model,
                                           const VectorX<Scalar>& theta,
                                           const std::vector<Scalar>& times) {
  using std::abs;
  const int n = model.state_dim;
  const int m = model.param_count();
  const int nt = static_cast<int>(times.size());
  SampledJacobian<Scalar> out;
  out.states.resize(nt, n);
  out.jacobian.resize(static_cast<Eigen::Index>(nt) * n, m);
  for (int i = 0; i < nt; ++i)
    out.states.row(i) = model.closed_form(theta, times[i]).transpose();
  VectorX<Scalar> th = theta;
  for (int j = 0; j < m; ++j) {
    const Scalar h = Scalar(1e-6) * (Scalar(1) + abs(theta[j]));
    for (int i = 0; i < nt; ++i) {
      th[j] = theta[j] + h;
      const VectorX<Scalar> yp = model.closed_form(th, times[i]);
      th[j] = theta[j] - h;
      const VectorX<Scalar> ym = model.closed_form(th, times[i]);
      th[j] = theta[j];
      for (int k = 0; k < n; ++k)
        out.jacobian(static_cast<Eigen::Index>(i) * n + k, j) = (yp[k] - ym[k]) / (Scalar(2) * h);
    }
  }
  return out;
}

// One augmented integration (state y of size n; sensitivity S of size n x m
// obeying dS/dt = (df/dy) S + df/dtheta, with S(t0) holding a 1 in each
// initial-condition parameter's (state, param) slot), sampled by dense output
// at the requested times.  Falls back to closed-form sampling for models
// without dynamics.
template <class Scalar = double>
SampledJacobian<Scalar> sample_sensitivities(const ModelSystem<Scalar>& model,
                                             const VectorX<Scalar>& theta, Scalar t0,
                                             const std::vector<Scalar>& times,
                                             const IntegrateOptions<Scalar>& opt = {}) {
  if (!model.has_rhs()) return sample_closed_form(model, theta, times);

  const int n = model.state_dim;
  const int m = model.param_count();
  const Eigen::Index aug_dim = static_cast<Eigen::Index>(n) * (1 + m);

  VectorX<Scalar> z0 = VectorX<Scalar>::Zero(aug_dim);
  z0.head(n) = model.initial_state(theta);
  for (int j = 0; j < m; ++j)
    if (model.parameters[j].kind == ParamKind::initial_condition)
      z0[n + static_cast<Eigen::Index>(j) * n + model.parameters[j].state_index] = Scalar(1);

  auto rhs_aug = [&](Scalar t, const VectorX<Scalar>& z, VectorX<Scalar>& dz) {
    const VectorX<Scalar> y = z.head(n);
    const MatrixX<Scalar> A = state_jacobian(model, y, theta, t);
    const MatrixX<Scalar> B = param_jacobian(model, y, theta, t);
    dz.head(n) = eval_rhs(model, y, theta, t);
    Eigen::Map<const MatrixX<Scalar>> S(z.data() + n, n, m);
    Eigen::Map<MatrixX<Scalar>> dS(dz.data() + n, n, m);
    dS = A * S + B;
  };

  MatrixX<Scalar> Z;
  integrate_dense(rhs_aug, z0, t0, times.back(), times, Z, opt);

  const int nt = static_cast<int>(times.size());
  SampledJacobian<Scalar> out;
  out.states = Z.leftCols(n);
  out.jacobian.resize(static_cast<Eigen::Index>(nt) * n, m);
  for (int i = 0; i < nt; ++i)
    for (int j = 0; j < m; ++j)
      for (int k = 0; k < n; ++k)
        out.jacobian(static_cast<Eigen::Index>(i) * n + k, j) =
            Z(i, n + static_cast<Eigen::Index>(j) * n + k);
  return out;
}

// Forward sensitivity integration on a uniform sample grid, with optional
// recentering of states (and, when the fixed-point Jacobian is supplied, of
// the sensitivities as well).
template <class Scalar = double>
TrajectoryJacobian<Scalar> integrate_with_sensitivities(
    const ModelSystem<Scalar>& model, const VectorX<Scalar>& theta, const SampleGrid<Scalar>& grid,
    const std::optional<Recenter<Scalar>>& recenter = std::nullopt,
    const IntegrateOptions<Scalar>& opt = {}) {
  const VectorX<Scalar> tvec = grid.times();
  const std::vector<Scalar> times(tvec.data(), tvec.data() + tvec.size());
  SampledJacobian<Scalar> s = sample_sensitivities(model, theta, grid.t0, times, opt);

  TrajectoryJacobian<Scalar> tj;
  tj.grid = grid;
  tj.observed_components = detail::all_components<Scalar>(model.state_dim);
  tj.states = std::move(s.states);
  tj.jacobian = std::move(s.jacobian);
  if (recenter) {
    tj.states.rowwise() -= recenter->fixed_point.transpose();
    tj.recenter_offset = recenter->fixed_point;
    if (recenter->fixed_point_jacobian) {
      const MatrixX<Scalar>& fpJ = *recenter->fixed_point_jacobian;
      const int n = model.state_dim;
      for (int i = 0; i < grid.n_samples; ++i)
        tj.jacobian.block(static_cast<Eigen::Index>(i) * n, 0, n, model.param_count()) -= fpJ;
    }
  }
  return tj;
}

// Independent cross-check: re-integrates the plain system at theta_j +/- h,
// h = 1e-6 * (1 + |theta_j|), and differences the sampled trajectories.
template <class Scalar = double>
TrajectoryJacobian<Scalar> finite_difference_jacobian(const ModelSystem<Scalar>& model,
                                                      const VectorX<Scalar>& theta,
                                                      const SampleGrid<Scalar>& grid,
                                                      const IntegrateOptions<Scalar>& opt = {}) {
  using std::abs;
  const int n = model.state_dim;
  const int m = model.param_count();
  const VectorX<Scalar> tvec = grid.times();
  const std::vector<Scalar> times(tvec.data(), tvec.data() + tvec.size());

  TrajectoryJacobian<Scalar> tj;
  tj.grid = grid;
  tj.observed_components = detail::all_components<Scalar>(n);

  if (!model.has_rhs()) {
    SampledJacobian<Scalar> s = sample_closed_form(model, theta, times);
    tj.states = std::move(s.states);
    tj.jacobian = std::move(s.jacobian);
    return tj;
  }

  auto solve = [&](const VectorX<Scalar>& th, MatrixX<Scalar>& out) {
    auto rhs = [&](Scalar t, const VectorX<Scalar>& y, VectorX<Scalar>& dy) {
      dy = eval_rhs(model, y, th, t);
    };
    integrate_dense(rhs, model.initial_state(th), grid.t0, times.back(), times, out, opt);
  };

  solve(theta, tj.states);
  tj.jacobian.resize(static_cast<Eigen::Index>(grid.n_samples) * n, m);
  VectorX<Scalar> th = theta;
  MatrixX<Scalar> Yp, Ym;
  for (int j = 0; j < m; ++j) {
    const Scalar h = Scalar(1e-6) * (Scalar(1) + abs(theta[j]));
    th[j] = theta[j] + h;
    solve(th, Yp);
    th[j] = theta[j] - h;
    solve(th, Ym);
    th[j] = theta[j];
    for (int i = 0; i < grid.n_samples; ++i)
      for (int k = 0; k < n; ++k)
        tj.jacobian(static_cast<Eigen::Index>(i) * n + k, j) = (Yp(i, k) - Ym(i, k)) / (Scalar(2) * h);
  }
  return tj;
}

}  // namespace twig
