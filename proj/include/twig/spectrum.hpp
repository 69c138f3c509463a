#pragma once

#include "twig/sensitivity.hpp"
#include "twig/types.hpp"

#include <Eigen/SVD>

#include <stdexcept>
#include <vector>

namespace twig {

// FIM eigensystem at one horizon, derived from the SVD of J (the Gram matrix
// J^T J is never formed; squaring would halve the usable precision).
template <class Scalar = double>
struct FimSpectrum {
  Scalar t_max = Scalar(0);
  VectorX<Scalar> eigenvalues;       // descending; lambda_k = sigma_k^2 after flooring
  MatrixX<Scalar> eigenvectors;      // m x m, columns paired with eigenvalues, sign-canonical
  MatrixX<Scalar> participation;     // p(i,k) = V(i,k)^2: parameter i's weight in direction k
  VectorX<Scalar> singular_values;   // post-floor
  std::vector<bool> floored;         // per direction: clamped at the resolution floor
  int rank_floor = 0;                // how many directions were clamped
};

// Make the largest-magnitude component of each column positive; ties resolve
// to the first extremal index, so the choice is deterministic.
template <class Scalar>
void canonicalize_signs(MatrixX<Scalar>& V) {
  for (Eigen::Index k = 0; k < V.cols(); ++k) {
    Eigen::Index imax = 0;
    V.col(k).cwiseAbs().maxCoeff(&imax);
    if (V(imax, k) < Scalar(0)) V.col(k) = -V.col(k);
  }
}

// Spectrum of J^T J via the SVD of J.  Singular values below
// floor_rel * sigma_max are clamped to that floor and flagged: double
// precision cannot resolve them, so their eigenvalue series carry no slope
// information and classification treats them as irrelevant by fiat.
template <class Scalar = double>
FimSpectrum<Scalar> fim_spectrum(const MatrixX<Scalar>& jacobian, Scalar t_max,
                                 Scalar floor_rel = Scalar(1e-12)) {
  if (jacobian.rows() < jacobian.cols())
    throw std::invalid_argument("fim_spectrum: need at least as many observation rows as parameters");
  if (!jacobian.allFinite())
    throw std::invalid_argument("fim_spectrum: Jacobian has non-finite entries");

  Eigen::BDCSVD<MatrixX<Scalar>> svd(jacobian, Eigen::ComputeThinV);
  FimSpectrum<Scalar> s;
  s.t_max = t_max;
  s.singular_values = svd.singularValues();
  s.eigenvectors = svd.matrixV();
  canonicalize_signs(s.eigenvectors);

  const Eigen::Index m = s.singular_values.size();
  const Scalar floor_abs = floor_rel * s.singular_values[0];
  s.floored.assign(m, false);
  for (Eigen::Index k = 0; k < m; ++k)
    if (s.singular_values[k] < floor_abs) {
      s.singular_values[k] = floor_abs;
      s.floored[k] = true;
      ++s.rank_floor;
    }
  s.eigenvalues = s.singular_values.array().square();
  s.participation = s.eigenvectors.array().square();
  return s;
}

template <class Scalar = double>
FimSpectrum<Scalar> fim_spectrum(const TrajectoryJacobian<Scalar>& tj,
                                 Scalar floor_rel = Scalar(1e-12)) {
  return fim_spectrum(tj.jacobian, tj.grid.t_max, floor_rel);
}

}  // namespace twig
