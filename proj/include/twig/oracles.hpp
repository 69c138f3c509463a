#pragma once

#include "twig/types.hpp"

#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

namespace twig {

// Closed-form reference solutions for the one-dimensional normal forms at
// their bifurcation points (r = 0, all nuisance terms off).  These are
// implemented independently of the integrator and the model tables so they
// can serve as oracles for both.
enum class OracleFamily { saddle_node, transcritical, pitchfork_super, pitchfork_sub };

enum class OraclePerturbation { r, alpha, initial_value };

struct OracleSpec {
  OracleFamily family = OracleFamily::saddle_node;
  double y0 = -1.0;

  // Finite escape/breakdown time of the closed form, when one exists:
  // saddle-node blows up at 1/y0 for y0 > 0, transcritical at -1/y0 for
  // y0 < 0, and the subcritical pitchfork at 1/(2 y0^2) for any y0 != 0.
  std::optional<double> singular_time() const {
    switch (family) {
      case OracleFamily::saddle_node:
        if (y0 > 0.0) return 1.0 / y0;
        return std::nullopt;
      case OracleFamily::transcritical:
        if (y0 < 0.0) return -1.0 / y0;
        return std::nullopt;
      case OracleFamily::pitchfork_super:
        return std::nullopt;
      case OracleFamily::pitchfork_sub:
        if (y0 != 0.0) return 1.0 / (2.0 * y0 * y0);
        return std::nullopt;
    }
    return std::nullopt;
  }
};

// Templated on the scalar so tests can run the same formulas with
// std::complex<double> (complex-step differentiation in t).
template <class Scalar>
Scalar oracle_trajectory(OracleFamily family, Scalar y0, Scalar t) {
  using std::sqrt;
  switch (family) {
    case OracleFamily::saddle_node:
      return y0 / (Scalar(1) - y0 * t);
    case OracleFamily::transcritical:
      return y0 / (Scalar(1) + y0 * t);
    case OracleFamily::pitchfork_super:
      return y0 / sqrt(Scalar(1) + Scalar(2) * t * y0 * y0);
    case OracleFamily::pitchfork_sub:
      return y0 / sqrt(Scalar(1) - Scalar(2) * t * y0 * y0);
  }
  throw std::invalid_argument("oracle_trajectory: unknown family");
}

namespace detail {

// Integer exponents use repeated multiplication: exact for negative bases
// (complex pow would take the principal branch and leak a spurious imaginary
// part, which breaks complex-step differentiation through these formulas).
template <class Scalar>
Scalar scalar_pow(Scalar base, double e) {
  using std::pow;
  const long k = static_cast<long>(e);
  if (static_cast<double>(k) == e && k > -64 && k < 64) {
    Scalar r(1);
    for (long i = 0; i < (k < 0 ? -k : k); ++i) r *= base;
    return k < 0 ? Scalar(1) / r : r;
  }
  return pow(base, Scalar(e));
}

}  // namespace detail

// Sensitivity of the trajectory to one perturbation, obtained by solving the
// variational equation along the closed-form solution:
//   r              — the normal-form bifurcation parameter,
//   alpha (order n)— the nuisance term of order n (y^(n+2) for the quadratic
//                    families, y^(n+3) for the pitchforks),
//   initial_value  — the initial condition y0.
// All perturbation sensitivities vanish at t = 0; the initial-value one is 1.
template <class Scalar>
Scalar oracle_sensitivity(OracleFamily family, OraclePerturbation which, int n, Scalar y0, Scalar t) {
  using std::log;
  const Scalar one(1), two(2);
  if (which == OraclePerturbation::alpha && n < 1)
    throw std::invalid_argument("oracle_sensitivity: alpha order must be >= 1");

  switch (family) {
    case OracleFamily::saddle_node: {
      const Scalar u = one - y0 * t;
      const Scalar u2 = u * u;
      switch (which) {
        case OraclePerturbation::r:
          return (one - u * u2) / (Scalar(3) * y0 * u2);
        case OraclePerturbation::alpha:
          if (n == 1) return -y0 * y0 * log(u) / u2;
          return detail::scalar_pow(y0, n + 1) * (one - detail::scalar_pow(u, 1.0 - n)) /
                 (Scalar(1.0 - n) * u2);
        case OraclePerturbation::initial_value:
          return one / u2;
      }
      break;
    }
    case OracleFamily::transcritical: {
      const Scalar v = one + y0 * t;
      const Scalar v2 = v * v;
      switch (which) {
        case OraclePerturbation::r:
          return (v2 - one) / (two * v2);
        case OraclePerturbation::alpha:
          if (n == 1) return y0 * y0 * log(v) / v2;
          return detail::scalar_pow(y0, n + 1) * (detail::scalar_pow(v, 1.0 - n) - one) /
                 (Scalar(1.0 - n) * v2);
        case OraclePerturbation::initial_value:
          return one / v2;
      }
      break;
    }
    case OracleFamily::pitchfork_super: {
      const Scalar q = one + two * t * y0 * y0;
      const Scalar q32 = detail::scalar_pow(q, 1.5);
      switch (which) {
        case OraclePerturbation::r:
          return (q * q - one) / (Scalar(4) * y0 * q32);
        case OraclePerturbation::alpha:
          if (n == 2) return y0 * y0 * y0 * log(q) / (two * q32);
          return detail::scalar_pow(y0, n + 1) * (detail::scalar_pow(q, 1.0 - 0.5 * n) - one) /
                 (Scalar(2.0 - n) * q32);
        case OraclePerturbation::initial_value:
          return one / q32;
      }
      break;
    }
    case OracleFamily::pitchfork_sub: {
      const Scalar p = one - two * t * y0 * y0;
      const Scalar p32 = detail::scalar_pow(p, 1.5);
      switch (which) {
        case OraclePerturbation::r:
          return (one - p * p) / (Scalar(4) * y0 * p32);
        case OraclePerturbation::alpha:
          if (n == 2) return -y0 * y0 * y0 * log(p) / (two * p32);
          return detail::scalar_pow(y0, n + 1) * (one - detail::scalar_pow(p, 1.0 - 0.5 * n)) /
                 (Scalar(2.0 - n) * p32);
        case OraclePerturbation::initial_value:
          return one / p32;
      }
      break;
    }
  }
  throw std::invalid_argument("oracle_sensitivity: unsupported (family, which) pair");
}

// Checked double-precision entry points: reject evaluation at or beyond the
// family's singular time.
inline void oracle_check_time(const OracleSpec& spec, double t) {
  if (auto ts = spec.singular_time(); ts && t >= *ts)
    throw std::domain_error("oracle: t is at or beyond the singular time");
}

inline double oracle_trajectory(const OracleSpec& spec, double t) {
  oracle_check_time(spec, t);
  return oracle_trajectory(spec.family, spec.y0, t);
}

inline double oracle_sensitivity(const OracleSpec& spec, OraclePerturbation which, int n, double t) {
  oracle_check_time(spec, t);
  return oracle_sensitivity(spec.family, which, n, spec.y0, t);
}

// Predicted log-log growth exponent of a direction's information-matrix
// contribution as the horizon grows (sample count held fixed): the squared
// sensitivity scales like t^exponent, times a logarithmic factor when
// log_factor is set.  Only the pairs with a derived prediction are tabulated.
struct GrowthOrder {
  double exponent = 0.0;
  bool log_factor = false;
};

inline GrowthOrder growth_order(OracleFamily family, OraclePerturbation which, int n = 0) {
  if (which == OraclePerturbation::r) {
    switch (family) {
      case OracleFamily::saddle_node:
        return {2.0, false};
      case OracleFamily::transcritical:
        return {0.0, false};
      case OracleFamily::pitchfork_super:
        return {1.0, false};
      case OracleFamily::pitchfork_sub:
        return {1.0, false};
    }
  }
  if (family == OracleFamily::pitchfork_super && which == OraclePerturbation::alpha && n == 2)
    return {0.0, true};
  throw std::invalid_argument("growth_order: no prediction for this (family, which) pair");
}

// Full expected sensitivity matrix for a registry normal-form model with
// `order` nuisance terms at its bifurcation point, columns ordered to match
// the registry layout (r, alpha_1..alpha_order, y0).
inline MatXd oracle_jacobian(const OracleSpec& spec, const std::vector<double>& times, int order) {
  MatXd J(static_cast<Eigen::Index>(times.size()), order + 2);
  for (std::size_t i = 0; i < times.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    J(row, 0) = oracle_sensitivity(spec, OraclePerturbation::r, 0, times[i]);
    for (int n = 1; n <= order; ++n)
      J(row, n) = oracle_sensitivity(spec, OraclePerturbation::alpha, n, times[i]);
    J(row, order + 1) = oracle_sensitivity(spec, OraclePerturbation::initial_value, 0, times[i]);
  }
  return J;
}

}  // namespace twig
