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

#include <utility>
#include <vector>

#include "ncsrate/common.hpp"
#include "ncsrate/rational.hpp"
#include "ncsrate/state_space.hpp"

namespace ncsrate {

/// Block plant
///
///   [z]   [G11  G12] [w]
///   [y] = [G21  G22] [u]
///
/// with vector disturbance w, vector performance output z, scalar control u
/// and scalar measurement y. G22 must be strictly proper so the control loop
/// has no algebraic feedthrough.
///
/// A joint minimal realization of all four blocks is built on construction;
/// shared dynamics between blocks (e.g. y = z) collapse to a single copy so
/// no duplicated unstable modes survive.
class TwoByTwoPlant {
 public:
  TwoByTwoPlant(std::vector<std::vector<RationalFilter>> g11,
                std::vector<RationalFilter> g12, std::vector<RationalFilter> g21,
                RationalFilter g22)
      : g11_(std::move(g11)),
        g12_(std::move(g12)),
        g21_(std::move(g21)),
        g22_(std::move(g22)) {
    n_z_ = static_cast<int>(g11_.size());
    if (n_z_ == 0) throw Error("TwoByTwoPlant: empty performance block");
    n_w_ = static_cast<int>(g11_[0].size());
    if (n_w_ == 0) throw Error("TwoByTwoPlant: empty disturbance block");
    for (const auto& row : g11_) {
      if (static_cast<int>(row.size()) != n_w_) {
        throw Error("TwoByTwoPlant: ragged G11 block");
      }
    }
    if (static_cast<int>(g12_.size()) != n_z_) {
      throw Error("TwoByTwoPlant: G12 must have one row per performance output");
    }
    if (static_cast<int>(g21_.size()) != n_w_) {
      throw Error("TwoByTwoPlant: G21 must have one column per disturbance");
    }
    if (!g22_.is_strictly_proper()) {
      throw Error("TwoByTwoPlant: G22 must be strictly proper");
    }
    build_realization();
  }

  /// SISO convenience constructor.
  TwoByTwoPlant(RationalFilter g11, RationalFilter g12, RationalFilter g21,
                RationalFilter g22)
      : TwoByTwoPlant(std::vector<std::vector<RationalFilter>>{{std::move(g11)}},
                      std::vector<RationalFilter>{std::move(g12)},
                      std::vector<RationalFilter>{std::move(g21)},
                      std::move(g22)) {}

  int disturbance_dim() const { return n_w_; }
  int performance_dim() const { return n_z_; }

  const RationalFilter& g11(int i = 0, int j = 0) const { return g11_[i][j]; }
  const RationalFilter& g12(int i = 0) const { return g12_[i]; }
  const RationalFilter& g21(int j = 0) const { return g21_[j]; }
  const RationalFilter& g22() const { return g22_; }

  /// Joint minimal realization, inputs [w_0..w_{n_w-1}, u], outputs
  /// [z_0..z_{n_z-1}, y].
  const StateSpaceSystem& realization() const { return joint_; }

  int input_u() const { return n_w_; }
  int output_y() const { return n_z_; }

  std::vector<int> disturbance_inputs() const {
    std::vector<int> idx(n_w_);
    for (int j = 0; j < n_w_; ++j) idx[j] = j;
    return idx;
  }

  std::vector<int> performance_outputs() const {
    std::vector<int> idx(n_z_);
    for (int i = 0; i < n_z_; ++i) idx[i] = i;
    return idx;
  }

  /// Realization with the control channel delayed by h samples (the delay
  /// block shifted into the plant).
  StateSpaceSystem delayed_realization(int h) const {
    return delay_input(joint_, input_u(), h);
  }

  bool open_loop_stable() const { return is_stable(joint_); }

  /// Plant poles outside the unit circle (from the joint minimal
  /// realization).
  std::vector<std::complex<double>> unstable_poles(
      double margin = kStabilityMargin) const {
    std::vector<std::complex<double>> out;
    Eigen::VectorXcd eig = eigenvalues(joint_.A);
    for (Eigen::Index i = 0; i < eig.size(); ++i) {
      if (std::abs(eig(i)) >= 1.0 - margin) out.push_back(eig(i));
    }
    return out;
  }

 private:
  void build_realization() {
    StateSpaceSystem stacked;
    for (int j = 0; j < n_w_; ++j) {
      StateSpaceSystem col = realize(g11_[0][j]);
      for (int i = 1; i < n_z_; ++i) col = vcat(col, realize(g11_[i][j]));
      col = vcat(col, realize(g21_[j]));
      stacked = (j == 0) ? col : hcat(stacked, col);
    }
    StateSpaceSystem ucol = realize(g12_[0]);
    for (int i = 1; i < n_z_; ++i) ucol = vcat(ucol, realize(g12_[i]));
    ucol = vcat(ucol, realize(g22_));
    stacked = hcat(stacked, ucol);
    joint_ = minimal_realization(stacked);
  }

  std::vector<std::vector<RationalFilter>> g11_;
  std::vector<RationalFilter> g12_;
  std::vector<RationalFilter> g21_;
  RationalFilter g22_;
  int n_w_ = 0, n_z_ = 0;
  StateSpaceSystem joint_;
};

namespace detail {

/// Minimum singular value of [A - lambda I, B] relative to the matrix scale;
/// near-zero means the mode lambda cannot be reached from B.
inline double pbh_input_margin(const Matrix& A, const Matrix& B,
                               std::complex<double> lambda) {
  const int n = static_cast<int>(A.rows());
  ComplexMatrix M(n, n + B.cols());
  M.leftCols(n) = -A.cast<std::complex<double>>();
  M.leftCols(n).diagonal().array() += lambda;
  M.rightCols(B.cols()) = B.cast<std::complex<double>>();
  Eigen::JacobiSVD<ComplexMatrix> svd(M);
  const double scale = std::max(1.0, svd.singularValues()(0));
  return svd.singularValues().minCoeff() / scale;
}

inline double pbh_output_margin(const Matrix& A, const Matrix& C,
                                std::complex<double> lambda) {
  return pbh_input_margin(A.transpose(), C.transpose(), lambda);
}

}  // namespace detail

/// True iff every eigenvalue of A outside the stability margin is reachable
/// from B.
inline bool is_stabilizable(const Matrix& A, const Matrix& B,
                            double tol = 1e-8) {
  Eigen::VectorXcd eig = eigenvalues(A);
  for (Eigen::Index i = 0; i < eig.size(); ++i) {
    if (std::abs(eig(i)) < 1.0 - kStabilityMargin) continue;
    if (detail::pbh_input_margin(A, B, eig(i)) < tol) return false;
  }
  return true;
}

inline bool is_detectable(const Matrix& A, const Matrix& C,
                          double tol = 1e-8) {
  return is_stabilizable(A.transpose(), C.transpose(), tol);
}

}  // namespace ncsrate
