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
#include <complex>
#include <string>
#include <vector>

#include "ncsrate/common.hpp"
#include "ncsrate/rational.hpp"

namespace ncsrate {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;

/// Discrete-time LTI system x(k+1) = A x(k) + B u(k), y(k) = C x(k) + D u(k).
///
/// Values are immutable in spirit: all operations return new systems, nothing
/// mutates in place, so instances are safe to share across threads.
struct StateSpaceSystem {
  Matrix A;  // n x n
  Matrix B;  // n x m
  Matrix C;  // p x n
  Matrix D;  // p x m

  StateSpaceSystem() : A(0, 0), B(0, 0), C(0, 0), D(0, 0) {}

  StateSpaceSystem(Matrix a, Matrix b, Matrix c, Matrix d)
      : A(std::move(a)), B(std::move(b)), C(std::move(c)), D(std::move(d)) {
    if (A.rows() != A.cols() || B.rows() != A.rows() || C.cols() != A.rows() ||
        D.rows() != C.rows() || D.cols() != B.cols()) {
      throw Error("StateSpaceSystem: inconsistent matrix dimensions");
    }
  }

  /// Static gain (0 states).
  static StateSpaceSystem gain(const Matrix& d) {
    return StateSpaceSystem(Matrix::Zero(0, 0), Matrix::Zero(0, d.cols()),
                            Matrix::Zero(d.rows(), 0), d);
  }

  static StateSpaceSystem scalar_gain(double g, int size = 1) {
    return gain(Matrix::Identity(size, size) * g);
  }

  int order() const { return static_cast<int>(A.rows()); }
  int inputs() const { return static_cast<int>(B.cols()); }
  int outputs() const { return static_cast<int>(C.rows()); }

  /// Frequency response C (zI - A)^{-1} B + D at a single point.
  ComplexMatrix eval(std::complex<double> z) const {
    const int n = order();
    if (n == 0) return D.cast<std::complex<double>>();
    ComplexMatrix zi = ComplexMatrix::Identity(n, n) * z - A;
    ComplexMatrix x = zi.partialPivLu().solve(B.cast<std::complex<double>>());
    return C.cast<std::complex<double>>() * x + D.cast<std::complex<double>>();
  }
};

inline double spectral_radius(const Matrix& A) {
  if (A.rows() == 0) return 0.0;
  Eigen::EigenSolver<Matrix> es(A, /*computeEigenvectors=*/false);
  if (es.info() != Eigen::Success) {
    throw Error("spectral_radius: eigenvalue iteration failed");
  }
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

inline Eigen::VectorXcd eigenvalues(const Matrix& A) {
  if (A.rows() == 0) return Eigen::VectorXcd(0);
  Eigen::EigenSolver<Matrix> es(A, false);
  if (es.info() != Eigen::Success) {
    throw Error("eigenvalues: eigenvalue iteration failed");
  }
  return es.eigenvalues();
}

/// True iff the spectral radius of A is below 1 - margin.
inline bool is_stable(const StateSpaceSystem& sys,
                      double margin = kStabilityMargin) {
  return spectral_radius(sys.A) < 1.0 - margin;
}

// ---------------------------------------------------------------------------
// Interconnections. All rational arithmetic is done on realizations rather
// than by polynomial multiplication; coefficient blow-up and pole-zero
// cancellation never enter.
// ---------------------------------------------------------------------------

/// Series connection u -> sys1 -> sys2 -> y.
inline StateSpaceSystem series(const StateSpaceSystem& s1,
                               const StateSpaceSystem& s2) {
  if (s2.inputs() != s1.outputs()) {
    throw Error("series: output/input dimension mismatch");
  }
  const int n1 = s1.order(), n2 = s2.order();
  Matrix A = Matrix::Zero(n1 + n2, n1 + n2);
  A.topLeftCorner(n1, n1) = s1.A;
  A.bottomLeftCorner(n2, n1) = s2.B * s1.C;
  A.bottomRightCorner(n2, n2) = s2.A;
  Matrix B(n1 + n2, s1.inputs());
  B.topRows(n1) = s1.B;
  B.bottomRows(n2) = s2.B * s1.D;
  Matrix C(s2.outputs(), n1 + n2);
  C.leftCols(n1) = s2.D * s1.C;
  C.rightCols(n2) = s2.C;
  return StateSpaceSystem(A, B, C, s2.D * s1.D);
}

/// Parallel sum: same input, outputs added.
inline StateSpaceSystem add(const StateSpaceSystem& s1,
                            const StateSpaceSystem& s2) {
  if (s1.inputs() != s2.inputs() || s1.outputs() != s2.outputs()) {
    throw Error("add: dimension mismatch");
  }
  const int n1 = s1.order(), n2 = s2.order();
  Matrix A = Matrix::Zero(n1 + n2, n1 + n2);
  A.topLeftCorner(n1, n1) = s1.A;
  A.bottomRightCorner(n2, n2) = s2.A;
  Matrix B(n1 + n2, s1.inputs());
  B.topRows(n1) = s1.B;
  B.bottomRows(n2) = s2.B;
  Matrix C(s1.outputs(), n1 + n2);
  C.leftCols(n1) = s1.C;
  C.rightCols(n2) = s2.C;
  return StateSpaceSystem(A, B, C, s1.D + s2.D);
}

inline StateSpaceSystem negate(const StateSpaceSystem& s) {
  return StateSpaceSystem(s.A, s.B, -s.C, -s.D);
}

inline StateSpaceSystem subtract(const StateSpaceSystem& s1,
                                 const StateSpaceSystem& s2) {
  return add(s1, negate(s2));
}

/// Vertical concatenation: shared input, outputs stacked [s1; s2].
inline StateSpaceSystem vcat(const StateSpaceSystem& s1,
                             const StateSpaceSystem& s2) {
  if (s1.inputs() != s2.inputs()) throw Error("vcat: input count mismatch");
  const int n1 = s1.order(), n2 = s2.order();
  Matrix A = Matrix::Zero(n1 + n2, n1 + n2);
  A.topLeftCorner(n1, n1) = s1.A;
  A.bottomRightCorner(n2, n2) = s2.A;
  Matrix B(n1 + n2, s1.inputs());
  B.topRows(n1) = s1.B;
  B.bottomRows(n2) = s2.B;
  Matrix C = Matrix::Zero(s1.outputs() + s2.outputs(), n1 + n2);
  C.topLeftCorner(s1.outputs(), n1) = s1.C;
  C.bottomRightCorner(s2.outputs(), n2) = s2.C;
  Matrix D(s1.outputs() + s2.outputs(), s1.inputs());
  D.topRows(s1.outputs()) = s1.D;
  D.bottomRows(s2.outputs()) = s2.D;
  return StateSpaceSystem(A, B, C, D);
}

/// Horizontal concatenation: inputs stacked [u1; u2], outputs added.
inline StateSpaceSystem hcat(const StateSpaceSystem& s1,
                             const StateSpaceSystem& s2) {
  if (s1.outputs() != s2.outputs()) throw Error("hcat: output count mismatch");
  const int n1 = s1.order(), n2 = s2.order();
  Matrix A = Matrix::Zero(n1 + n2, n1 + n2);
  A.topLeftCorner(n1, n1) = s1.A;
  A.bottomRightCorner(n2, n2) = s2.A;
  Matrix B = Matrix::Zero(n1 + n2, s1.inputs() + s2.inputs());
  B.topLeftCorner(n1, s1.inputs()) = s1.B;
  B.bottomRightCorner(n2, s2.inputs()) = s2.B;
  Matrix C(s1.outputs(), n1 + n2);
  C.leftCols(n1) = s1.C;
  C.rightCols(n2) = s2.C;
  Matrix D(s1.outputs(), s1.inputs() + s2.inputs());
  D.leftCols(s1.inputs()) = s1.D;
  D.rightCols(s2.inputs()) = s2.D;
  return StateSpaceSystem(A, B, C, D);
}

/// Keep a subset of inputs (B/D column selection).
inline StateSpaceSystem select_inputs(const StateSpaceSystem& s,
                                      const std::vector<int>& idx) {
  Matrix B(s.order(), static_cast<int>(idx.size()));
  Matrix D(s.outputs(), static_cast<int>(idx.size()));
  for (std::size_t j = 0; j < idx.size(); ++j) {
    B.col(j) = s.B.col(idx[j]);
    D.col(j) = s.D.col(idx[j]);
  }
  return StateSpaceSystem(s.A, B, s.C, D);
}

/// Keep a subset of outputs (C/D row selection).
inline StateSpaceSystem select_outputs(const StateSpaceSystem& s,
                                       const std::vector<int>& idx) {
  Matrix C(static_cast<int>(idx.size()), s.order());
  Matrix D(static_cast<int>(idx.size()), s.inputs());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    C.row(i) = s.C.row(idx[i]);
    D.row(i) = s.D.row(idx[i]);
  }
  return StateSpaceSystem(s.A, s.B, C, D);
}

/// Closed loop of a SISO-style loop gain: y = (I - L)^{-1} u, i.e. feedback
/// y = u + L y. Requires the algebraic loop I - D_L to be invertible.
inline StateSpaceSystem inverse_one_minus(const StateSpaceSystem& L) {
  if (L.inputs() != L.outputs()) {
    throw Error("inverse_one_minus: loop gain must be square");
  }
  const int p = L.outputs();
  Matrix ImD = Matrix::Identity(p, p) - L.D;
  Eigen::FullPivLU<Matrix> lu(ImD);
  if (!lu.isInvertible()) {
    throw Error("inverse_one_minus: algebraic loop is singular (ill-posed)");
  }
  Matrix ImDinv = lu.inverse();
  // y = C x + D y + u  =>  y = (I-D)^{-1}(C x + u)
  Matrix C = ImDinv * L.C;
  Matrix A = L.A + L.B * C;
  Matrix B = L.B * ImDinv;
  return StateSpaceSystem(A, B, C, ImDinv);
}

/// Exact inverse of a square biproper system (D invertible).
inline StateSpaceSystem inverse(const StateSpaceSystem& s) {
  if (s.inputs() != s.outputs()) throw Error("inverse: system must be square");
  Eigen::FullPivLU<Matrix> lu(s.D);
  if (!lu.isInvertible()) {
    throw Error("inverse: system is not biproper (singular feedthrough)");
  }
  Matrix Dinv = lu.inverse();
  return StateSpaceSystem(s.A - s.B * Dinv * s.C, s.B * Dinv, -Dinv * s.C,
                          Dinv);
}

/// Chain of k unit delays (SISO): transfer z^{-k}.
inline StateSpaceSystem unit_delay(int k = 1) {
  if (k < 0) throw Error("unit_delay: negative delay");
  if (k == 0) return StateSpaceSystem::scalar_gain(1.0);
  Matrix A = Matrix::Zero(k, k);
  for (int i = 0; i + 1 < k; ++i) A(i, i + 1) = 1.0;
  Matrix B = Matrix::Zero(k, 1);
  B(k - 1, 0) = 1.0;
  Matrix C = Matrix::Zero(1, k);
  C(0, 0) = 1.0;
  return StateSpaceSystem(A, B, C, Matrix::Zero(1, 1));
}

/// Insert an h-stage shift register in front of one input channel.
inline StateSpaceSystem delay_input(const StateSpaceSystem& s, int input,
                                    int h) {
  if (h < 0) throw Error("delay_input: negative delay");
  if (input < 0 || input >= s.inputs()) throw Error("delay_input: bad index");
  if (h == 0) return s;
  const int n = s.order();
  // Register d_1..d_h, d_i(k+1) = d_{i+1}(k), d_h(k+1) = u(k); channel sees
  // d_1(k) = u(k-h).
  Matrix A = Matrix::Zero(n + h, n + h);
  A.topLeftCorner(n, n) = s.A;
  A.block(0, n, n, 1) = s.B.col(input);
  for (int i = 0; i + 1 < h; ++i) A(n + i, n + i + 1) = 1.0;
  Matrix B = Matrix::Zero(n + h, s.inputs());
  B.topRows(n) = s.B;
  B.col(input).setZero();
  B(n + h - 1, input) = 1.0;
  Matrix C = Matrix::Zero(s.outputs(), n + h);
  C.leftCols(n) = s.C;
  C.block(0, n, s.outputs(), 1) = s.D.col(input);
  Matrix D = s.D;
  D.col(input).setZero();
  return StateSpaceSystem(A, B, C, D);
}

/// Realization of z^{-h} * sys: every input channel gains an h-stage shift
/// register. h = 0 returns the system unchanged.
inline StateSpaceSystem delay_augment(const StateSpaceSystem& s, int h) {
  if (h < 0) throw Error("delay_augment: negative delay");
  StateSpaceSystem out = s;
  for (int j = 0; j < s.inputs(); ++j) out = delay_input(out, j, h);
  return out;
}

// ---------------------------------------------------------------------------
// Realization of rational filters and minimal realizations.
// ---------------------------------------------------------------------------

/// Controllable canonical realization of a proper SISO filter.
inline StateSpaceSystem realize(const RationalFilter& f) {
  if (f.numerator().size() > f.denominator().size()) {
    throw Error("realize: improper filter");
  }
  const int n = f.degree();
  const std::vector<double>& den = f.denominator();
  std::vector<double> num(n + 1, 0.0);
  // Right-align the numerator against the (monic) denominator.
  const int offset = n + 1 - static_cast<int>(f.numerator().size());
  for (std::size_t i = 0; i < f.numerator().size(); ++i) {
    num[offset + i] = f.numerator()[i];
  }
  const double d = num[0];
  if (n == 0) return StateSpaceSystem::scalar_gain(d);
  Matrix A = Matrix::Zero(n, n);
  for (int j = 0; j < n; ++j) A(0, j) = -den[j + 1];
  for (int i = 1; i < n; ++i) A(i, i - 1) = 1.0;
  Matrix B = Matrix::Zero(n, 1);
  B(0, 0) = 1.0;
  Matrix C(1, n);
  for (int j = 0; j < n; ++j) C(0, j) = num[j + 1] - d * den[j + 1];
  Matrix D(1, 1);
  D(0, 0) = d;
  return StateSpaceSystem(A, B, C, D);
}

namespace detail {

/// Orthonormal basis of the column space of M, rank decided by singular
/// values relative to the largest.
inline Matrix column_space(const Matrix& M, double tol = kRankTolerance) {
  if (M.cols() == 0 || M.rows() == 0) return Matrix::Zero(M.rows(), 0);
  Eigen::JacobiSVD<Matrix> svd(M, Eigen::ComputeThinU);
  const Vector& s = svd.singularValues();
  const double cutoff = tol * std::max(s.size() ? s(0) : 0.0, 1e-300);
  int rank = 0;
  for (int i = 0; i < s.size(); ++i) {
    if (s(i) > cutoff) ++rank;
  }
  return svd.matrixU().leftCols(rank);
}

/// Orthonormal basis of the reachable subspace of (A, B), built by subspace
/// iteration (one multiply by A per step, no explicit Krylov powers).
inline Matrix reachable_subspace(const Matrix& A, const Matrix& B,
                                 double tol = kRankTolerance) {
  Matrix V = column_space(B, tol);
  const int n = static_cast<int>(A.rows());
  for (int iter = 0; iter < n && V.cols() < n; ++iter) {
    Matrix AV = A * V;
    // Normalize columns before the rank decision so ||A|| does not skew it.
    for (int j = 0; j < AV.cols(); ++j) {
      const double nrm = AV.col(j).norm();
      if (nrm > 0) AV.col(j) /= nrm;
    }
    Matrix stacked(n, V.cols() + AV.cols());
    stacked << V, AV;
    Matrix W = column_space(stacked, tol);
    if (W.cols() == V.cols()) break;
    V = W;
  }
  return V;
}

/// Restrict the system to the reachable subspace.
inline StateSpaceSystem controllable_part(const StateSpaceSystem& s,
                                          double tol) {
  Matrix V = reachable_subspace(s.A, s.B, tol);
  const int r = static_cast<int>(V.cols());
  if (r == s.order()) return s;
  return StateSpaceSystem(V.transpose() * s.A * V, V.transpose() * s.B,
                          s.C * V, s.D);
}

inline StateSpaceSystem transpose(const StateSpaceSystem& s) {
  return StateSpaceSystem(s.A.transpose(), s.C.transpose(), s.B.transpose(),
                          s.D.transpose());
}

}  // namespace detail

/// Minimal realization: removes unreachable then unobservable states via
/// orthogonal projections. Valid for unstable systems.
inline StateSpaceSystem minimal_realization(const StateSpaceSystem& s,
                                            double tol = kRankTolerance) {
  StateSpaceSystem c = detail::controllable_part(s, tol);
  StateSpaceSystem o = detail::transpose(
      detail::controllable_part(detail::transpose(c), tol));
  return o;
}

// ---------------------------------------------------------------------------
// Time and frequency responses.
// ---------------------------------------------------------------------------

/// First `count` impulse-response samples g_0 = D, g_k = C A^{k-1} B.
inline std::vector<Matrix> impulse_response(const StateSpaceSystem& s,
                                            int count) {
  std::vector<Matrix> g;
  g.reserve(count);
  if (count <= 0) return g;
  g.push_back(s.D);
  Matrix X = s.B;  // A^{k-1} B
  for (int k = 1; k < count; ++k) {
    g.push_back(s.C * X);
    X = s.A * X;
  }
  return g;
}

/// Precomputed Hessenberg form for repeated frequency-response solves; each
/// evaluation costs O(n^2) instead of O(n^3).
class FrequencyResponder {
 public:
  explicit FrequencyResponder(const StateSpaceSystem& s)
      : D_(s.D), n_(s.order()) {
    if (n_ > 0) {
      Eigen::HessenbergDecomposition<Matrix> hd(s.A);
      H_ = hd.matrixH();
      Matrix Q = hd.matrixQ();
      QtB_ = Q.transpose() * s.B;
      CQ_ = s.C * Q;
    }
  }

  /// Response at z: C (zI - A)^{-1} B + D.
  ComplexMatrix eval(std::complex<double> z) const {
    if (n_ == 0) return D_.cast<std::complex<double>>();
    ComplexMatrix X = solve_hessenberg(z, QtB_.cast<std::complex<double>>());
    return CQ_.cast<std::complex<double>>() * X +
           D_.cast<std::complex<double>>();
  }

 private:
  // Solve (z I - H) X = R with H upper Hessenberg, Gaussian elimination with
  // row pivoting between adjacent rows.
  ComplexMatrix solve_hessenberg(std::complex<double> z,
                                 ComplexMatrix R) const {
    ComplexMatrix M = -H_.cast<std::complex<double>>();
    M.diagonal().array() += z;
    const int n = n_;
    for (int k = 0; k < n - 1; ++k) {
      if (std::abs(M(k + 1, k)) > std::abs(M(k, k))) {
        M.row(k).tail(n - k).swap(M.row(k + 1).tail(n - k));
        R.row(k).swap(R.row(k + 1));
      }
      if (M(k, k) == std::complex<double>(0.0, 0.0)) {
        throw Error("FrequencyResponder: singular system at grid point");
      }
      const std::complex<double> f = M(k + 1, k) / M(k, k);
      M.row(k + 1).tail(n - k - 1) -= f * M.row(k).tail(n - k - 1);
      M(k + 1, k) = 0.0;
      R.row(k + 1) -= f * R.row(k);
    }
    for (int k = n - 1; k >= 0; --k) {
      for (int j = k + 1; j < n; ++j) R.row(k) -= M(k, j) * R.row(j);
      if (M(k, k) == std::complex<double>(0.0, 0.0)) {
        throw Error("FrequencyResponder: singular system at grid point");
      }
      R.row(k) /= M(k, k);
    }
    return R;
  }

  Matrix H_, QtB_, CQ_, D_;
  int n_ = 0;
};

}  // namespace ncsrate
