#pragma once

#include "twig/types.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace twig {

template <class Scalar = double>
struct IntegrateOptions {
  Scalar abs_tol = Scalar(1e-10);
  Scalar rel_tol = Scalar(1e-8);
  Scalar max_norm = Scalar(1e8);  // |y|_inf beyond this is divergence
  long max_steps = 20'000'000;
};

namespace detail {

// Dormand-Prince 5(4) tableau (FSAL) with the quartic dense-output weights.
template <class Scalar>
struct Dopri5Tableau {
  static constexpr Scalar c2 = Scalar(1) / 5, c3 = Scalar(3) / 10, c4 = Scalar(4) / 5,
                          c5 = Scalar(8) / 9;
  static constexpr Scalar a21 = Scalar(1) / 5;
  static constexpr Scalar a31 = Scalar(3) / 40, a32 = Scalar(9) / 40;
  static constexpr Scalar a41 = Scalar(44) / 45, a42 = Scalar(-56) / 15, a43 = Scalar(32) / 9;
  static constexpr Scalar a51 = Scalar(19372) / 6561, a52 = Scalar(-25360) / 2187,
                          a53 = Scalar(64448) / 6561, a54 = Scalar(-212) / 729;
  static constexpr Scalar a61 = Scalar(9017) / 3168, a62 = Scalar(-355) / 33,
                          a63 = Scalar(46732) / 5247, a64 = Scalar(49) / 176,
                          a65 = Scalar(-5103) / 18656;
  static constexpr Scalar a71 = Scalar(35) / 384, a73 = Scalar(500) / 1113,
                          a74 = Scalar(125) / 192, a75 = Scalar(-2187) / 6784,
                          a76 = Scalar(11) / 84;
  static constexpr Scalar e1 = Scalar(71) / 57600, e3 = Scalar(-71) / 16695,
                          e4 = Scalar(71) / 1920, e5 = Scalar(-17253) / 339200,
                          e6 = Scalar(22) / 525, e7 = Scalar(-1) / 40;
  static constexpr Scalar d1 = Scalar(-12715105075.0) / Scalar(11282082432.0),
                          d3 = Scalar(87487479700.0) / Scalar(32700410799.0),
                          d4 = Scalar(-10690763975.0) / Scalar(1880347072.0),
                          d5 = Scalar(701980252875.0) / Scalar(199316789632.0),
                          d6 = Scalar(-1453857185.0) / Scalar(822651844.0),
                          d7 = Scalar(69997945.0) / Scalar(29380423.0);
};

template <class Scalar, class RHS>
Scalar initial_step(RHS&& rhs, Scalar t0, const VectorX<Scalar>& y0, const VectorX<Scalar>& f0,
                    Scalar t_end, const IntegrateOptions<Scalar>& opt) {
  using std::max;
  using std::min;
  using std::pow;
  using std::sqrt;
  const auto dim = y0.size();
  Scalar d0 = 0, d1 = 0;
  for (Eigen::Index i = 0; i < dim; ++i) {
    const Scalar sc = opt.abs_tol + opt.rel_tol * std::abs(y0[i]);
    d0 += (y0[i] / sc) * (y0[i] / sc);
    d1 += (f0[i] / sc) * (f0[i] / sc);
  }
  d0 = sqrt(d0 / Scalar(dim));
  d1 = sqrt(d1 / Scalar(dim));
  Scalar h0 = (d0 < Scalar(1e-5) || d1 < Scalar(1e-5)) ? Scalar(1e-6) : Scalar(0.01) * d0 / d1;
  h0 = min(h0, (t_end - t0));
  VectorX<Scalar> y1 = y0 + h0 * f0;
  VectorX<Scalar> f1(dim);
  rhs(t0 + h0, y1, f1);
  Scalar d2 = 0;
  for (Eigen::Index i = 0; i < dim; ++i) {
    const Scalar sc = opt.abs_tol + opt.rel_tol * std::abs(y0[i]);
    const Scalar df = (f1[i] - f0[i]) / sc;
    d2 += df * df;
  }
  d2 = sqrt(d2 / Scalar(dim)) / h0;
  Scalar h1;
  if (max(d1, d2) <= Scalar(1e-15))
    h1 = max(Scalar(1e-6), h0 * Scalar(1e-3));
  else
    h1 = pow(Scalar(0.01) / max(d1, d2), Scalar(1) / Scalar(5));
  return min(min(Scalar(100) * h0, h1), t_end - t0);
}

}  // namespace detail

// Integrate dy/dt = rhs(t, y) from t0 to t_end with adaptive Dormand-Prince
// 5(4) steps, writing y(eval_times[i]) into row i of `out` via the fifth-order
// dense interpolant (sample times never constrain the step sequence).
// eval_times must ascend within [t0, t_end].  Throws IntegrationError on
// divergence (|y|_inf > max_norm or non-finite) and on step-size underflow or
// step-budget exhaustion (stiffness).
template <class Scalar, class RHS>
void integrate_dense(RHS&& rhs, const VectorX<Scalar>& y0, Scalar t0, Scalar t_end,
                     const std::vector<Scalar>& eval_times, MatrixX<Scalar>& out,
                     const IntegrateOptions<Scalar>& opt = {}) {
  using T = detail::Dopri5Tableau<Scalar>;
  using std::abs;
  using std::max;
  using std::min;
  using std::pow;
  if (!(t_end > t0)) throw std::invalid_argument("integrate_dense: t_end must exceed t0");
  const auto dim = y0.size();
  const auto n_eval = static_cast<Eigen::Index>(eval_times.size());
  out.resize(n_eval, dim);

  Eigen::Index idx = 0;
  while (idx < n_eval && eval_times[idx] <= t0) {
    out.row(idx) = y0.transpose();
    ++idx;
  }

  VectorX<Scalar> y = y0, y_new(dim), y_err(dim);
  VectorX<Scalar> k1(dim), k2(dim), k3(dim), k4(dim), k5(dim), k6(dim), k7(dim), tmp(dim);
  rhs(t0, y, k1);
  if (!k1.allFinite())
    throw IntegrationError(IntegrationFailure::divergence, static_cast<double>(t0),
                           "right-hand side non-finite at the initial state");
  Scalar t = t0;
  Scalar h = detail::initial_step(rhs, t0, y, k1, t_end, opt);
  if (!(h > Scalar(0)) || !std::isfinite(static_cast<double>(h)))
    h = min(Scalar(1e-6), t_end - t0);
  bool just_rejected = false;
  long steps = 0;

  while (t < t_end) {
    if (++steps > opt.max_steps)
      throw IntegrationError(IntegrationFailure::stiffness, static_cast<double>(t),
                             "step budget exhausted near t=" + std::to_string(static_cast<double>(t)) +
                                 " (possible stiffness)");
    const Scalar h_min = Scalar(16) * std::numeric_limits<Scalar>::epsilon() * max(abs(t), Scalar(1));
    if (h < h_min)
      throw IntegrationError(IntegrationFailure::stiffness, static_cast<double>(t),
                             "step size underflow at t=" + std::to_string(static_cast<double>(t)) +
                                 " (stiffness)");
    const bool last = (t + Scalar(1.0001) * h >= t_end);
    if (last) h = t_end - t;

    tmp = y + h * (T::a21 * k1);
    rhs(t + T::c2 * h, tmp, k2);
    tmp = y + h * (T::a31 * k1 + T::a32 * k2);
    rhs(t + T::c3 * h, tmp, k3);
    tmp = y + h * (T::a41 * k1 + T::a42 * k2 + T::a43 * k3);
    rhs(t + T::c4 * h, tmp, k4);
    tmp = y + h * (T::a51 * k1 + T::a52 * k2 + T::a53 * k3 + T::a54 * k4);
    rhs(t + T::c5 * h, tmp, k5);
    tmp = y + h * (T::a61 * k1 + T::a62 * k2 + T::a63 * k3 + T::a64 * k4 + T::a65 * k5);
    rhs(t + h, tmp, k6);
    y_new = y + h * (T::a71 * k1 + T::a73 * k3 + T::a74 * k4 + T::a75 * k5 + T::a76 * k6);
    rhs(t + h, y_new, k7);
    y_err = h * (T::e1 * k1 + T::e3 * k3 + T::e4 * k4 + T::e5 * k5 + T::e6 * k6 + T::e7 * k7);

    Scalar err = 0;
    for (Eigen::Index i = 0; i < dim; ++i) {
      const Scalar sc = opt.abs_tol + opt.rel_tol * max(abs(y[i]), abs(y_new[i]));
      err += (y_err[i] / sc) * (y_err[i] / sc);
    }
    err = std::sqrt(err / Scalar(dim));

    if (!std::isfinite(static_cast<double>(err))) {
      h *= Scalar(0.1);
      just_rejected = true;
      continue;
    }
    if (err > Scalar(1)) {
      h *= max(Scalar(0.2), Scalar(0.9) * pow(err, Scalar(-0.2)));
      just_rejected = true;
      continue;
    }

    // Accepted.
    const Scalar t_new = last ? t_end : t + h;
    if (!y_new.allFinite() || y_new.template lpNorm<Eigen::Infinity>() > opt.max_norm)
      throw IntegrationError(IntegrationFailure::divergence, static_cast<double>(t_new),
                             "trajectory exceeded the divergence bound at t=" +
                                 std::to_string(static_cast<double>(t_new)));

    if (idx < n_eval && (eval_times[idx] <= t_new || t_new >= t_end)) {
      const VectorX<Scalar> dy = y_new - y;
      const VectorX<Scalar> bspl = h * k1 - dy;
      const VectorX<Scalar> r4 = dy - h * k7 - bspl;
      const VectorX<Scalar> r5 =
          h * (T::d1 * k1 + T::d3 * k3 + T::d4 * k4 + T::d5 * k5 + T::d6 * k6 + T::d7 * k7);
      while (idx < n_eval && (eval_times[idx] <= t_new || t_new >= t_end)) {
        Scalar th = (eval_times[idx] - t) / h;
        th = min(max(th, Scalar(0)), Scalar(1));
        const Scalar th1 = Scalar(1) - th;
        out.row(idx) =
            (y + th * (dy + th1 * (bspl + th * (r4 + th1 * r5)))).transpose();
        ++idx;
      }
    }

    k1.swap(k7);  // FSAL
    y.swap(y_new);
    t = t_new;
    const Scalar facmax = just_rejected ? Scalar(1) : Scalar(5);
    h *= min(facmax, max(Scalar(0.2), Scalar(0.9) * pow(max(err, Scalar(1e-10)), Scalar(-0.2))));
    just_rejected = false;
  }
}

}  // namespace twig
