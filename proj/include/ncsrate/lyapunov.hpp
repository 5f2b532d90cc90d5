// Copyright 2026 The ncsrate authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "ncsrate/common.hpp"
#include "ncsrate/state_space.hpp"

namespace ncsrate {

/// Solves the discrete Lyapunov equation X = A X A' + Q for stable A via
/// complex Schur reduction and column back-substitution.
inline Matrix solve_discrete_lyapunov(const Matrix& A, const Matrix& Q) {
  const int n = static_cast<int>(A.rows());
  if (n == 0) return Matrix::Zero(0, 0);
  if (A.cols() != n || Q.rows() != n || Q.cols() != n) {
    throw Error("solve_discrete_lyapunov: dimension mismatch");
  }
  Eigen::ComplexSchur<Matrix> schur(A, /*computeU=*/true);
  if (schur.info() != Eigen::Success) {
    throw Error("solve_discrete_lyapunov: Schur decomposition failed");
  }
  const ComplexMatrix& T = schur.matrixT();
  const ComplexMatrix& U = schur.matrixU();

  // Transformed equation Y - T Y T^H = F with Y = U^H X U.
  ComplexMatrix F = U.adjoint() * Q.cast<std::complex<double>>() * U;
  ComplexMatrix Y = ComplexMatrix::Zero(n, n);
  for (int k = n - 1; k >= 0; --k) {
    // Columns j > k of Y are known; see the T Y T^H column expansion.
    ComplexVector rhs = F.col(k);
    ComplexVector acc = ComplexVector::Zero(n);
    for (int j = k + 1; j < n; ++j) acc += std::conj(T(k, j)) * Y.col(j);
    rhs += T * acc;
    // (I - conj(T_kk) T) y_k = rhs, upper triangular solve.
    ComplexMatrix M = -std::conj(T(k, k)) * T;
    M.diagonal().array() += 1.0;
    Y.col(k) = M.triangularView<Eigen::Upper>().solve(rhs);
  }
  ComplexMatrix X = U * Y * U.adjoint();
  return X.real();
}

/// Controllability Gramian P = A P A' + B B' of a stable system.
inline Matrix controllability_gramian(const StateSpaceSystem& s) {
  if (!is_stable(s)) {
    throw UnstableSystemError(
        "controllability_gramian: system is not strictly stable");
  }
  return solve_discrete_lyapunov(s.A, s.B * s.B.transpose());
}

/// Steady-state output covariance C P C' + D D' under unit-variance white
/// input on every channel.
inline Matrix output_covariance(const StateSpaceSystem& s) {
  Matrix P = controllability_gramian(s);
  return s.C * P * s.C.transpose() + s.D * s.D.transpose();
}

/// Squared H2 norm: sum of squared impulse-response entries, computed through
/// the discrete Lyapunov equation. Errors on unstable systems, where the
/// norm is undefined.
inline double h2_norm_sq(const StateSpaceSystem& s) {
  return output_covariance(s).trace();
}

}  // namespace ncsrate
