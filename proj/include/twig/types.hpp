#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace twig {

template <class Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <class Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using VecXd = VectorX<double>;
using MatXd = MatrixX<double>;

// Uniform sampling grid t_i = t0 + (i/n) * t_max for i = 1..n.  The grid
// deliberately excludes t0 itself: the sensitivity rows there are the fixed
// initial pattern and carry no dynamical information.
template <class Scalar = double>
struct SampleGrid {
  Scalar t0 = Scalar(0);
  Scalar t_max = Scalar(1);
  int n_samples = 50;

  SampleGrid() = default;
  SampleGrid(Scalar t0_, Scalar t_max_, int n) : t0(t0_), t_max(t_max_), n_samples(n) {
    if (n_samples < 1) throw std::invalid_argument("SampleGrid: n_samples must be >= 1");
    if (!(t_max > Scalar(0))) throw std::invalid_argument("SampleGrid: t_max must be positive");
  }

  [[nodiscard]] VectorX<Scalar> times() const {
    VectorX<Scalar> t(n_samples);
    for (int i = 1; i <= n_samples; ++i)
      t[i - 1] = t0 + (Scalar(i) / Scalar(n_samples)) * t_max;
    return t;
  }
};

// Geometric horizon grid, lo..hi inclusive.
template <class Scalar = double>
VectorX<Scalar> geometric_grid(Scalar lo, Scalar hi, int count) {
  if (count < 2) throw std::invalid_argument("geometric_grid: count must be >= 2");
  if (!(lo > Scalar(0)) || !(hi > lo))
    throw std::invalid_argument("geometric_grid: need 0 < lo < hi");
  VectorX<Scalar> g(count);
  using std::exp;
  using std::log;
  const Scalar llo = log(lo), lhi = log(hi);
  for (int i = 0; i < count; ++i)
    g[i] = exp(llo + (lhi - llo) * Scalar(i) / Scalar(count - 1));
  g[0] = lo;
  g[count - 1] = hi;
  return g;
}

// Integration failure modes surfaced to callers.
enum class IntegrationFailure { divergence, stiffness };

class IntegrationError : public std::runtime_error {
 public:
  IntegrationError(IntegrationFailure kind, double t, const std::string& what)
      : std::runtime_error(what), kind_(kind), t_(t) {}
  [[nodiscard]] IntegrationFailure kind() const { return kind_; }
  [[nodiscard]] double time() const { return t_; }

 private:
  IntegrationFailure kind_;
  double t_;
};

}  // namespace twig
