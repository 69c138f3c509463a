#pragma once

#include "twig/types.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace twig {

enum class ParamKind { rate, initial_condition };
enum class CoordinateKind { cartesian, polar };

struct Parameter {
  std::string name;
  double value = 0.0;           // default value
  ParamKind kind = ParamKind::rate;
  int state_index = -1;         // for initial-condition parameters: which state they seed
};

// One monomial term of a right-hand side:
//   coeff * prod_j theta_j^param_powers[j] * prod_s y_s^powers[s] * (ln y_{log_of})?
// Parameter powers make terms like b*(y-alpha)^2 expressible exactly after
// binomial expansion, so state and parameter Jacobians stay analytic.
template <class Scalar = double>
struct PolyTerm {
  Scalar coeff = Scalar(1);
  std::vector<int> param_powers;  // exponent per parameter; empty means all zero
  std::vector<int> powers;        // exponent per state component
  int log_of = -1;                // multiply by ln(y[log_of]) when >= 0
};

// A parameterized dynamical system: either a polynomial-table ODE (equations
// non-empty) or a closed-form observation map (closed_form set, no ODE).
template <class Scalar = double>
struct ModelSystem {
  std::string name;
  std::string description;
  CoordinateKind coordinates = CoordinateKind::cartesian;
  int state_dim = 0;
  std::vector<Parameter> parameters;
  std::vector<std::vector<PolyTerm<Scalar>>> equations;
  std::vector<int> angle_states;  // for polar systems: which states are angles

  // Closed-form trajectory y(t; theta) for models defined as observation maps
  // rather than ODEs (and available as a cross-check where both exist).
  std::function<VectorX<Scalar>(const VectorX<Scalar>& theta, Scalar t)> closed_form;

  [[nodiscard]] int param_count() const { return static_cast<int>(parameters.size()); }
  [[nodiscard]] bool has_rhs() const { return !equations.empty(); }

  [[nodiscard]] bool has_log_terms() const {
    for (const auto& eq : equations)
      for (const auto& term : eq)
        if (term.log_of >= 0) return true;
    return false;
  }

  [[nodiscard]] bool is_angle_state(int s) const {
    return std::find(angle_states.begin(), angle_states.end(), s) != angle_states.end();
  }

  [[nodiscard]] int param_index(const std::string& pname) const {
    for (int j = 0; j < param_count(); ++j)
      if (parameters[j].name == pname) return j;
    return -1;
  }

  [[nodiscard]] VectorX<Scalar> default_params() const {
    VectorX<Scalar> th(param_count());
    for (int j = 0; j < param_count(); ++j) th[j] = Scalar(parameters[j].value);
    return th;
  }

  // Initial state implied by the initial-condition parameters; states without
  // an initial-condition parameter start at zero.
  [[nodiscard]] VectorX<Scalar> initial_state(const VectorX<Scalar>& theta) const {
    VectorX<Scalar> y0 = VectorX<Scalar>::Zero(state_dim);
    for (int j = 0; j < param_count(); ++j)
      if (parameters[j].kind == ParamKind::initial_condition)
        y0[parameters[j].state_index] = theta[j];
    return y0;
  }
};

namespace detail {

template <class Scalar>
Scalar ipow(Scalar base, int e) {
  Scalar r = Scalar(1);
  for (int i = 0; i < e; ++i) r *= base;
  return r;
}

}  // namespace detail

// Structural validation; throws std::invalid_argument on an ill-formed system.
template <class Scalar>
void validate_model(const ModelSystem<Scalar>& model) {
  if (model.state_dim <= 0) throw std::invalid_argument("model: state_dim must be positive");
  const int m = model.param_count();
  if (m == 0) throw std::invalid_argument("model: needs at least one parameter");
  for (int j = 0; j < m; ++j) {
    for (int j2 = j + 1; j2 < m; ++j2)
      if (model.parameters[j].name == model.parameters[j2].name)
        throw std::invalid_argument("model: duplicate parameter name '" + model.parameters[j].name + "'");
    const auto& p = model.parameters[j];
    if (p.kind == ParamKind::initial_condition &&
        (p.state_index < 0 || p.state_index >= model.state_dim))
      throw std::invalid_argument("model: initial-condition parameter '" + p.name +
                                  "' must map to a valid state component");
  }
  if (!model.has_rhs() && !model.closed_form)
    throw std::invalid_argument("model: needs either equations or a closed form");
  if (model.has_rhs() && static_cast<int>(model.equations.size()) != model.state_dim)
    throw std::invalid_argument("model: one equation per state component required");
  for (const auto& eq : model.equations)
    for (const auto& term : eq) {
      if (static_cast<int>(term.powers.size()) != model.state_dim)
        throw std::invalid_argument("model: term state powers must have length state_dim");
      if (!term.param_powers.empty() && static_cast<int>(term.param_powers.size()) != m)
        throw std::invalid_argument("model: term parameter powers must have length param_count");
      if (term.log_of >= model.state_dim)
        throw std::invalid_argument("model: log_of refers past the last state");
      for (int e : term.powers)
        if (e < 0) throw std::invalid_argument("model: negative state exponent");
      if (!term.param_powers.empty())
        for (int e : term.param_powers)
          if (e < 0) throw std::invalid_argument("model: negative parameter exponent");
    }
  for (int s : model.angle_states)
    if (s < 0 || s >= model.state_dim)
      throw std::invalid_argument("model: angle state index out of range");
  if (model.coordinates == CoordinateKind::polar && model.angle_states.empty())
    throw std::invalid_argument("model: polar system must name its angle states");
}

// f(y; theta).  Pure; non-finite values are the caller's divergence signal.
template <class Scalar>
VectorX<Scalar> eval_rhs(const ModelSystem<Scalar>& model, const VectorX<Scalar>& y,
                         const VectorX<Scalar>& theta, Scalar /*t*/ = Scalar(0)) {
  if (!model.has_rhs())
    throw std::logic_error("eval_rhs: model '" + model.name + "' is closed-form only");
  using std::log;
  VectorX<Scalar> f = VectorX<Scalar>::Zero(model.state_dim);
  for (int s = 0; s < model.state_dim; ++s) {
    Scalar acc = Scalar(0);
    for (const auto& term : model.equations[s]) {
      Scalar v = term.coeff;
      if (!term.param_powers.empty())
        for (int j = 0; j < theta.size(); ++j)
          if (term.param_powers[j] != 0) v *= detail::ipow(theta[j], term.param_powers[j]);
      for (int c = 0; c < model.state_dim; ++c)
        if (term.powers[c] != 0) v *= detail::ipow(y[c], term.powers[c]);
      if (term.log_of >= 0) v *= log(y[term.log_of]);
      acc += v;
    }
    f[s] = acc;
  }
  return f;
}

// A = df/dy, analytic from the term table.
template <class Scalar>
MatrixX<Scalar> state_jacobian(const ModelSystem<Scalar>& model, const VectorX<Scalar>& y,
                               const VectorX<Scalar>& theta, Scalar /*t*/ = Scalar(0)) {
  if (!model.has_rhs())
    throw std::logic_error("state_jacobian: model '" + model.name + "' is closed-form only");
  using std::log;
  const int n = model.state_dim;
  MatrixX<Scalar> A = MatrixX<Scalar>::Zero(n, n);
  for (int s = 0; s < n; ++s) {
    for (const auto& term : model.equations[s]) {
      Scalar c = term.coeff;
      if (!term.param_powers.empty())
        for (int j = 0; j < theta.size(); ++j)
          if (term.param_powers[j] != 0) c *= detail::ipow(theta[j], term.param_powers[j]);
      for (int d = 0; d < n; ++d) {
        // d/dy_d of  prod_c y_c^p_c * (ln y_L)?
        Scalar dv = Scalar(0);
        if (term.powers[d] > 0) {
          Scalar part = Scalar(term.powers[d]) * detail::ipow(y[d], term.powers[d] - 1);
          for (int c2 = 0; c2 < n; ++c2)
            if (c2 != d && term.powers[c2] != 0) part *= detail::ipow(y[c2], term.powers[c2]);
          if (term.log_of >= 0) part *= log(y[term.log_of]);
          dv += part;
        }
        if (term.log_of == d) {
          Scalar part = Scalar(1) / y[d];
          for (int c2 = 0; c2 < n; ++c2)
            if (term.powers[c2] != 0) part *= detail::ipow(y[c2], term.powers[c2]);
          dv += part;
        }
        A(s, d) += c * dv;
      }
    }
  }
  return A;
}

// B = df/dtheta, analytic from the term table.  Initial-condition parameters
// never appear in the right-hand side, so their columns are zero.
template <class Scalar>
MatrixX<Scalar> param_jacobian(const ModelSystem<Scalar>& model, const VectorX<Scalar>& y,
                               const VectorX<Scalar>& theta, Scalar /*t*/ = Scalar(0)) {
  if (!model.has_rhs())
    throw std::logic_error("param_jacobian: model '" + model.name + "' is closed-form only");
  using std::log;
  const int n = model.state_dim;
  const int m = model.param_count();
  MatrixX<Scalar> B = MatrixX<Scalar>::Zero(n, m);
  for (int s = 0; s < n; ++s) {
    for (const auto& term : model.equations[s]) {
      if (term.param_powers.empty()) continue;
      Scalar ypart = term.coeff;
      for (int c = 0; c < n; ++c)
        if (term.powers[c] != 0) ypart *= detail::ipow(y[c], term.powers[c]);
      if (term.log_of >= 0) ypart *= log(y[term.log_of]);
      for (int j = 0; j < m; ++j) {
        if (term.param_powers[j] == 0) continue;
        Scalar dp = Scalar(term.param_powers[j]) * detail::ipow(theta[j], term.param_powers[j] - 1);
        for (int j2 = 0; j2 < m; ++j2)
          if (j2 != j && term.param_powers[j2] != 0) dp *= detail::ipow(theta[j2], term.param_powers[j2]);
        B(s, j) += ypart * dp;
      }
    }
  }
  return B;
}

// Central finite-difference df/dtheta with step h = 1e-6 * (1 + |theta_j|);
// the independent cross-check for param_jacobian.
template <class Scalar>
MatrixX<Scalar> param_jacobian_fd(const ModelSystem<Scalar>& model, const VectorX<Scalar>& y,
                                  const VectorX<Scalar>& theta, Scalar t = Scalar(0)) {
  using std::abs;
  const int m = model.param_count();
  MatrixX<Scalar> B(model.state_dim, m);
  VectorX<Scalar> th = theta;
  for (int j = 0; j < m; ++j) {
    const Scalar h = Scalar(1e-6) * (Scalar(1) + abs(theta[j]));
    th[j] = theta[j] + h;
    const VectorX<Scalar> fp = eval_rhs(model, y, th, t);
    th[j] = theta[j] - h;
    const VectorX<Scalar> fm = eval_rhs(model, y, th, t);
    th[j] = theta[j];
    B.col(j) = (fp - fm) / (Scalar(2) * h);
  }
  if (!B.allFinite()) throw std::runtime_error("param_jacobian_fd: non-finite entries");
  return B;
}

}  // namespace twig
