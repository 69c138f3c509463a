#pragma once

#include "twig/model.hpp"
#include "twig/types.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <complex>
#include <optional>
#include <stdexcept>
#include <vector>

namespace twig {

enum class Stability { stable, unstable, marginal };

template <class Scalar = double>
struct FixedPoint {
  VectorX<Scalar> location;
  Scalar residual_norm = Scalar(0);
  Stability stability = Stability::marginal;
  std::vector<std::complex<Scalar>> eigenvalues_of_linearization;  // sorted by real part, descending
};

template <class Scalar = double>
struct NewtonOptions {
  Scalar residual_tol = Scalar(1e-10);   // componentwise |f| target
  int max_iterations = 100;
  int max_halvings = 20;
  Scalar marginal_tol = Scalar(1e-8);    // |Re lambda| below this is marginal
  Scalar domain_floor = Scalar(1e-12);   // clamp for states inside logarithms
};

struct OscillationResult {
  bool oscillatory = false;
  std::optional<double> period_estimate;
};

namespace detail {

// States a fixed point is solved for: everything except angle states, whose
// drift never vanishes on a rotating system.
template <class Scalar>
std::vector<int> solve_states(const ModelSystem<Scalar>& model) {
  std::vector<int> s;
  for (int i = 0; i < model.state_dim; ++i)
    if (!model.is_angle_state(i)) s.push_back(i);
  return s;
}

template <class Scalar>
std::vector<int> log_states(const ModelSystem<Scalar>& model) {
  std::vector<int> s;
  for (const auto& eq : model.equations)
    for (const auto& term : eq)
      if (term.log_of >= 0 &&
          std::find(s.begin(), s.end(), term.log_of) == s.end())
        s.push_back(term.log_of);
  return s;
}

template <class Scalar>
void clamp_domain(VectorX<Scalar>& y, const std::vector<int>& logs, Scalar floor_value) {
  for (int s : logs)
    if (y[s] < floor_value) y[s] = floor_value;
}

}  // namespace detail

// Damped Newton iteration on f(y; theta) = 0 with a finite-difference state
// Jacobian.  Angle states of polar systems are held fixed at the guess and
// excluded from the residual.  Throws std::runtime_error on non-convergence
// or a singular Jacobian at an iterate.
template <class Scalar = double>
FixedPoint<Scalar> find_fixed_point(const ModelSystem<Scalar>& model, const VectorX<Scalar>& theta,
                                    const VectorX<Scalar>& guess,
                                    const NewtonOptions<Scalar>& opt = {}) {
  using std::abs;
  if (!model.has_rhs())
    throw std::logic_error("find_fixed_point: model '" + model.name + "' has no dynamics");
  const std::vector<int> solve = detail::solve_states(model);
  const std::vector<int> logs = detail::log_states(model);
  const int ns = static_cast<int>(solve.size());
  if (ns == 0) throw std::logic_error("find_fixed_point: system has only angle states");

  VectorX<Scalar> y = guess;
  detail::clamp_domain(y, logs, opt.domain_floor);

  auto residual = [&](const VectorX<Scalar>& yy) {
    const VectorX<Scalar> f = eval_rhs(model, yy, theta);
    VectorX<Scalar> r(ns);
    for (int a = 0; a < ns; ++a) r[a] = f[solve[a]];
    return r;
  };

  VectorX<Scalar> r = residual(y);
  int it = 0;
  while (r.template lpNorm<Eigen::Infinity>() > opt.residual_tol) {
    if (++it > opt.max_iterations)
      throw std::runtime_error("find_fixed_point: no convergence within " +
                               std::to_string(opt.max_iterations) + " iterations");

    MatrixX<Scalar> J(ns, ns);
    VectorX<Scalar> yp = y;
    for (int b = 0; b < ns; ++b) {
      const int sb = solve[b];
      const Scalar h = Scalar(1e-6) * (Scalar(1) + abs(y[sb]));
      yp[sb] = y[sb] + h;
      detail::clamp_domain(yp, logs, opt.domain_floor);
      const VectorX<Scalar> rp = residual(yp);
      yp[sb] = y[sb] - h;
      detail::clamp_domain(yp, logs, opt.domain_floor);
      const VectorX<Scalar> rm = residual(yp);
      yp[sb] = y[sb];
      J.col(b) = (rp - rm) / (Scalar(2) * h);
    }

    Eigen::FullPivLU<MatrixX<Scalar>> lu(J);
    if (!lu.isInvertible())
      throw std::runtime_error("find_fixed_point: singular state Jacobian at an iterate");
    const VectorX<Scalar> step = lu.solve(-r);

    const Scalar r0 = r.norm();
    Scalar damp = Scalar(1);
    VectorX<Scalar> y_try;
    VectorX<Scalar> r_try;
    for (int halvings = 0;; ++halvings) {
      y_try = y;
      for (int a = 0; a < ns; ++a) y_try[solve[a]] += damp * step[a];
      detail::clamp_domain(y_try, logs, opt.domain_floor);
      r_try = residual(y_try);
      if (r_try.allFinite() && (r_try.norm() < r0 || halvings >= opt.max_halvings)) break;
      damp /= Scalar(2);
    }
    y = y_try;
    r = r_try;
    if (!r.allFinite())
      throw std::runtime_error("find_fixed_point: residual became non-finite");
  }

  FixedPoint<Scalar> fp;
  fp.location = y;
  fp.residual_norm = residual(y).template lpNorm<Eigen::Infinity>();

  const MatrixX<Scalar> A_full = state_jacobian(model, y, theta);
  MatrixX<Scalar> A(ns, ns);
  for (int a = 0; a < ns; ++a)
    for (int b = 0; b < ns; ++b) A(a, b) = A_full(solve[a], solve[b]);
  Eigen::EigenSolver<MatrixX<Scalar>> es(A);
  for (int a = 0; a < ns; ++a) fp.eigenvalues_of_linearization.push_back(es.eigenvalues()[a]);
  std::sort(fp.eigenvalues_of_linearization.begin(), fp.eigenvalues_of_linearization.end(),
            [](const auto& u, const auto& v) {
              if (u.real() != v.real()) return u.real() > v.real();
              return u.imag() > v.imag();
            });
  Scalar max_re = fp.eigenvalues_of_linearization.front().real();
  if (abs(max_re) <= opt.marginal_tol)
    fp.stability = Stability::marginal;
  else
    fp.stability = (max_re < Scalar(0)) ? Stability::stable : Stability::unstable;
  return fp;
}

// d(fixed point)/d(theta) by the implicit function theorem: A * dfp + B = 0 at
// the fixed point, restricted to the solved (non-angle) states; angle rows and
// singular linearizations are reported as errors by the LU solve.
template <class Scalar = double>
MatrixX<Scalar> fixed_point_jacobian(const ModelSystem<Scalar>& model, const VectorX<Scalar>& theta,
                                     const VectorX<Scalar>& fixed_point) {
  const std::vector<int> solve = detail::solve_states(model);
  const int ns = static_cast<int>(solve.size());
  const int m = model.param_count();
  const MatrixX<Scalar> A_full = state_jacobian(model, fixed_point, theta);
  const MatrixX<Scalar> B_full = param_jacobian(model, fixed_point, theta);
  MatrixX<Scalar> A(ns, ns), B(ns, m);
  for (int a = 0; a < ns; ++a) {
    for (int b = 0; b < ns; ++b) A(a, b) = A_full(solve[a], solve[b]);
    B.row(a) = B_full.row(solve[a]);
  }
  Eigen::FullPivLU<MatrixX<Scalar>> lu(A);
  if (!lu.isInvertible())
    throw std::runtime_error("fixed_point_jacobian: marginal linearization, fixed-point "
                             "location is not differentiable here");
  const MatrixX<Scalar> X = lu.solve(-B);
  MatrixX<Scalar> full = MatrixX<Scalar>::Zero(model.state_dim, m);
  for (int a = 0; a < ns; ++a) full.row(solve[a]) = X.row(a);
  return full;
}

// Oscillation test: some centered observed component flips sign at least three
// times over the second half of the window.  The period estimate is the mean
// spacing of upward zero crossings of the first such component.
template <class Scalar = double>
OscillationResult detect_oscillation(const MatrixX<Scalar>& samples, const SampleGrid<Scalar>& grid) {
  OscillationResult res;
  const int n_rows = static_cast<int>(samples.rows());
  if (n_rows < 8) return res;
  const VectorX<Scalar> times = grid.times();
  const int start = n_rows / 2;
  const int len = n_rows - start;

  for (int c = 0; c < samples.cols(); ++c) {
    const auto seg = samples.col(c).segment(start, len);
    const Scalar mean = seg.mean();
    int flips = 0;
    int prev_sign = 0;
    std::vector<double> up_crossings;
    for (int i = 0; i < len; ++i) {
      const Scalar v = seg[i] - mean;
      const int sgn = (v > Scalar(0)) - (v < Scalar(0));
      if (sgn == 0) continue;
      if (prev_sign != 0 && sgn != prev_sign) {
        ++flips;
        if (sgn > 0 && i > 0) {
          const Scalar v0 = seg[i - 1] - mean;
          const Scalar frac = v0 / (v0 - v);  // linear interpolation to the zero
          up_crossings.push_back(static_cast<double>(times[start + i - 1] +
                                                     frac * (times[start + i] - times[start + i - 1])));
        }
      }
      prev_sign = sgn;
    }
    if (flips >= 3) {
      res.oscillatory = true;
      if (up_crossings.size() >= 2)
        res.period_estimate = (up_crossings.back() - up_crossings.front()) /
                              static_cast<double>(up_crossings.size() - 1);
      return res;
    }
  }
  return res;
}

// Project polar samples (radius, angle) onto the plane so oscillations are
// visible as sign changes; cartesian samples pass through unchanged.
template <class Scalar = double>
MatrixX<Scalar> oscillation_view(const ModelSystem<Scalar>& model, const MatrixX<Scalar>& samples) {
  using std::cos;
  using std::sin;
  if (model.coordinates != CoordinateKind::polar || model.angle_states.size() != 1 ||
      model.state_dim != 2)
    return samples;
  const int ang = model.angle_states.front();
  const int rad = 1 - ang;
  MatrixX<Scalar> xy(samples.rows(), 2);
  for (Eigen::Index i = 0; i < samples.rows(); ++i) {
    xy(i, 0) = samples(i, rad) * cos(samples(i, ang));
    xy(i, 1) = samples(i, rad) * sin(samples(i, ang));
  }
  return xy;
}

// Newton from the time-average of cycle samples: the interior equilibrium a
// planar limit cycle must enclose.  For polar systems the average is taken in
// the embedded plane, so a circular orbit averages to its enclosed center.
template <class Scalar = double>
struct InteriorFixedPoint {
  FixedPoint<Scalar> fixed_point;
  bool was_oscillatory = false;
};

template <class Scalar = double>
InteriorFixedPoint<Scalar> interior_fixed_point(const ModelSystem<Scalar>& model,
                                                const VectorX<Scalar>& theta,
                                                const MatrixX<Scalar>& cycle_samples,
                                                const SampleGrid<Scalar>& grid,
                                                const NewtonOptions<Scalar>& opt = {}) {
  const MatrixX<Scalar> view = oscillation_view(model, cycle_samples);
  InteriorFixedPoint<Scalar> out;
  out.was_oscillatory = detect_oscillation(view, grid).oscillatory;

  VectorX<Scalar> guess(model.state_dim);
  if (model.coordinates == CoordinateKind::polar && view.cols() == 2) {
    const Scalar cx = view.col(0).mean();
    const Scalar cy = view.col(1).mean();
    const int ang = model.angle_states.front();
    guess[1 - ang] = std::sqrt(cx * cx + cy * cy);
    guess[ang] = cycle_samples(cycle_samples.rows() - 1, ang);
  } else {
    for (int c = 0; c < model.state_dim; ++c) guess[c] = cycle_samples.col(c).mean();
  }
  out.fixed_point = find_fixed_point(model, theta, guess, opt);
  return out;
}

}  // namespace twig
