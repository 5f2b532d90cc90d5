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
#include <limits>
#include <string>

#include "ncsrate/common.hpp"
#include "ncsrate/plant.hpp"
#include "ncsrate/state_space.hpp"

namespace ncsrate {

struct RiccatiSolution {
  Matrix P;     // stabilizing solution, symmetric PSD
  Matrix gain;  // K = (R + B'PB)^{-1}(B'PA + S'), closed loop A - B K stable
  double residual = 0.0;
  int iterations = 0;
};

namespace detail {

/// Gain (R + B'PB)^{-1} num with an absolute-scale singularity guard: a
/// degenerate innovation direction with a matching zero numerator yields a
/// zero gain (the cheap-control case); a nonzero numerator against a
/// singular innovation is an error.
inline Matrix dare_guarded_gain(const Matrix& BtPB, const Matrix& num,
                                double scale) {
  Eigen::JacobiSVD<Matrix> svd(BtPB, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const double smax =
      svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
  const double floor = 1e-12 * std::max(1.0, scale);
  if (smax <= floor) {
    if (num.norm() > 1e-9 * std::max(1.0, scale)) {
      throw Error("solve_dare: singular control weight with nonzero coupling");
    }
    return Matrix::Zero(num.rows(), num.cols());
  }
  svd.setThreshold(floor / smax);
  return svd.solve(num);
}

inline double dare_residual(const Matrix& A, const Matrix& B, const Matrix& Q,
                            const Matrix& R, const Matrix& S, const Matrix& P) {
  if (P.size() == 0) return std::numeric_limits<double>::infinity();
  const Matrix BtPB = R + B.transpose() * P * B;
  const Matrix cross = A.transpose() * P * B + S;
  Matrix gain = dare_guarded_gain(BtPB, cross.transpose(), P.norm());
  Matrix res = A.transpose() * P * A - cross * gain + Q - P;
  return res.norm();
}

/// Structured doubling iteration for X = A'XA - A'XB (R + B'XB)^{-1} B'XA + Q
/// with R nonsingular. Quadratically convergent for stabilizable/detectable
/// data.
inline bool dare_doubling(const Matrix& A, const Matrix& G0, const Matrix& Q,
                          Matrix* X, int* iters, double tol = 1e-13,
                          int max_iter = 80) {
  const int n = static_cast<int>(A.rows());
  Matrix Ak = A, Gk = G0, Hk = Q;
  const Matrix I = Matrix::Identity(n, n);
  for (int k = 0; k < max_iter; ++k) {
    Eigen::PartialPivLU<Matrix> lu(I + Gk * Hk);
    Matrix W1 = lu.solve(Ak);            // (I + G H)^{-1} A
    Matrix W2 = lu.solve(Gk);            // (I + G H)^{-1} G
    Matrix Anext = Ak * W1;
    Matrix Gnext = Gk + Ak * W2 * Ak.transpose();
    Matrix Hnext = Hk + Ak.transpose() * Hk * W1;
    Hnext = 0.5 * (Hnext + Hnext.transpose());
    const double delta = (Hnext - Hk).norm() / (1.0 + Hnext.norm());
    Ak = Anext;
    Gk = Gnext;
    Hk = Hnext;
    if (!Hk.allFinite()) return false;
    if (delta < tol) {
      *X = Hk;
      *iters = k + 1;
      return true;
    }
  }
  *X = Hk;
  return false;
}

/// Plain Riccati value iteration. Handles singular R through a guarded
/// pseudo-inverse: a singular innovation with a matching zero numerator
/// contributes nothing (the cheap-control case with relative degree > 1).
inline bool dare_fixed_point(const Matrix& A, const Matrix& B, const Matrix& Q,
                             const Matrix& R, const Matrix& S, Matrix* X,
                             int* iters, double tol = 1e-13,
                             int max_iter = 200000) {
  Matrix P = Q;
  for (int k = 0; k < max_iter; ++k) {
    const Matrix BtPB = R + B.transpose() * P * B;
    const Matrix num = B.transpose() * P * A + S.transpose();
    Matrix corr = num.transpose() * dare_guarded_gain(BtPB, num, P.norm());
    Matrix Pnext = A.transpose() * P * A - corr + Q;
    Pnext = 0.5 * (Pnext + Pnext.transpose());
    const double delta = (Pnext - P).norm() / (1.0 + Pnext.norm());
    P = Pnext;
    if (!P.allFinite() || P.norm() > 1e100) {
      *X = P;
      return false;
    }
    if (delta < tol) {
      *X = P;
      *iters = k + 1;
      return true;
    }
  }
  *X = P;
  return false;
}

}  // namespace detail

/// Stabilizing solution of the discrete algebraic Riccati equation
///
///   P = A'PA - (A'PB + S)(R + B'PB)^{-1}(B'PA + S') + Q.
///
/// Doubling is used when R is positive definite, with value iteration as the
/// fallback and as the path for semidefinite R (cheap control). Requires
/// (A, B) stabilizable.
inline RiccatiSolution solve_dare(const Matrix& A, const Matrix& B,
                                  const Matrix& Q, const Matrix& R,
                                  const Matrix& S_in = Matrix()) {
  const int n = static_cast<int>(A.rows());
  const int m = static_cast<int>(B.cols());
  if (A.cols() != n || B.rows() != n || Q.rows() != n || Q.cols() != n ||
      R.rows() != m || R.cols() != m) {
    throw Error("solve_dare: dimension mismatch");
  }
  Matrix S = S_in.size() ? S_in : Matrix::Zero(n, m);
  if (S.rows() != n || S.cols() != m) {
    throw Error("solve_dare: cross-term dimension mismatch");
  }
  if (!is_stabilizable(A, B)) {
    throw Error("solve_dare: pair (A, B) is not stabilizable");
  }

  Matrix P;
  int iters = 0;
  bool ok = false;

  Eigen::SelfAdjointEigenSolver<Matrix> res(R);
  const double r_min = m > 0 ? res.eigenvalues().minCoeff() : 0.0;
  const double r_scale = m > 0 ? res.eigenvalues().cwiseAbs().maxCoeff() : 0.0;
  const bool r_pd = m > 0 && r_min > 1e-12 * std::max(1.0, r_scale);

  if (r_pd) {
    // Absorb the cross term, then double.
    Eigen::LDLT<Matrix> rld(R);
    Matrix Ahat = A - B * rld.solve(S.transpose());
    Matrix Qhat = Q - S * rld.solve(S.transpose());
    Qhat = 0.5 * (Qhat + Qhat.transpose());
    Matrix G = B * rld.solve(B.transpose());
    ok = detail::dare_doubling(Ahat, G, Qhat, &P, &iters);
    if (!ok) ok = detail::dare_fixed_point(A, B, Q, R, S, &P, &iters);
  } else {
    ok = detail::dare_fixed_point(A, B, Q, R, S, &P, &iters);
  }
  if (!ok) {
    throw Error("solve_dare: iteration did not converge (residual " +
                std::to_string(detail::dare_residual(A, B, Q, R, S, P)) + ")");
  }

  RiccatiSolution sol;
  sol.P = 0.5 * (P + P.transpose());
  const Matrix BtPB = R + B.transpose() * sol.P * B;
  const Matrix num = B.transpose() * sol.P * A + S.transpose();
  sol.gain = detail::dare_guarded_gain(BtPB, num, sol.P.norm());
  sol.residual = detail::dare_residual(A, B, Q, R, S, sol.P);
  sol.iterations = iters;

  if (n > 0 && spectral_radius(A - B * sol.gain) >= 1.0) {
    throw Error("solve_dare: converged solution is not stabilizing");
  }
  return sol;
}

}  // namespace ncsrate
