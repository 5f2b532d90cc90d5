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

#include <optional>

#include "ncsrate/common.hpp"
#include "ncsrate/lyapunov.hpp"
#include "ncsrate/plant.hpp"
#include "ncsrate/riccati.hpp"
#include "ncsrate/state_space.hpp"

namespace ncsrate {

/// Regularizer added to the measurement-noise covariance when the channel is
/// noise-free and the filter Riccati equation degenerates.
inline constexpr double kMeasurementRegularizer = 1e-10;

/// Output-feedback design for the h-delay plant: certainty-equivalence gain
/// plus a current-measurement Kalman estimator, with the delay absorbed into
/// an input-side shift register. The controller at time k acts on y(k), and
/// its effect reaches the plant h samples later, which matches a channel
/// that delivers measurements with delay h.
struct DelayedLqgDesign {
  StateSpaceSystem plant;  // delay-augmented, inputs [w, u], outputs [z, y]
  int n_w = 0;
  int n_z = 0;
  int delay = 0;

  Matrix K;   // state-feedback gain (1 x n)
  Matrix L;   // predictor gain (n x 1)
  Matrix Lf;  // measurement-update gain (n x 1)

  StateSpaceSystem controller;   // y -> u
  StateSpaceSystem closed_loop;  // w -> [z; u], states (x, estimator error)
  /// Full injection maps of the parameterized loop: inputs [w, m, v] with m
  /// additive measurement noise and v an additive control term, outputs
  /// [z, u, e] with e the innovation sequence. e is unaffected by v, which
  /// is what makes controller parameterizations around this loop affine.
  StateSpaceSystem loop_maps;
  double variance_floor = 0.0;   // steady-state trace variance of z

  int states() const { return plant.order(); }

  Matrix A() const { return plant.A; }
  Matrix Bw() const { return plant.B.leftCols(n_w); }
  Matrix Bu() const { return plant.B.col(n_w); }
  Matrix Cz() const { return plant.C.topRows(n_z); }
  Matrix Cy() const { return plant.C.row(n_z); }
  Matrix Dzw() const { return plant.D.topLeftCorner(n_z, n_w); }
  Matrix Dzu() const { return plant.D.block(0, n_w, n_z, 1); }
  Matrix Dyw() const { return plant.D.block(n_z, 0, 1, n_w); }
};

/// Best achievable steady-state variance of z over causal controllers that
/// see the measurement with delay h, plus the controller achieving it.
struct PerformanceFloor {
  int delay = 0;
  double value = 0.0;
  StateSpaceSystem controller;
};

namespace detail {

inline DelayedLqgDesign assemble_design(StateSpaceSystem plant_aug, int n_w,
                                        int n_z, int h, const Matrix& K,
                                        const Matrix& L, const Matrix& Lf) {
  DelayedLqgDesign d;
  d.plant = std::move(plant_aug);
  d.n_w = n_w;
  d.n_z = n_z;
  d.delay = h;
  d.K = K;
  d.L = L;
  d.Lf = Lf;

  const int n = d.states();
  const Matrix A = d.A(), Bw = d.Bw(), Bu = d.Bu(), Cz = d.Cz(), Cy = d.Cy();
  const Matrix Dzw = d.Dzw(), Dzu = d.Dzu(), Dyw = d.Dyw();
  const Matrix I = Matrix::Identity(n, n);

  // Controller, states are the one-step state prediction:
  //   e = y - Cy xp;  u = -K (xp + Lf e);  xp+ = A xp + Bu u + L e.
  {
    Matrix G = L - Bu * K * Lf;
    Matrix Ac = A - Bu * K - G * Cy;
    Matrix Bc = G;
    Matrix Cc = -K * (I - Lf * Cy);
    Matrix Dc = -K * Lf;
    d.controller = StateSpaceSystem(Ac, Bc, Cc, Dc);
  }

  // Loop maps in (x, xtilde) coordinates, xtilde the prediction error.
  // Inputs [w, m, v], outputs [z, u, e].
  {
    Matrix Acl = Matrix::Zero(2 * n, 2 * n);
    Acl.topLeftCorner(n, n) = A - Bu * K;
    Acl.topRightCorner(n, n) = Bu * K * (I - Lf * Cy);
    Acl.bottomRightCorner(n, n) = A - L * Cy;
    Matrix Bcl = Matrix::Zero(2 * n, n_w + 2);
    Bcl.topLeftCorner(n, n_w) = Bw - Bu * K * Lf * Dyw;
    Bcl.block(0, n_w, n, 1) = -Bu * K * Lf;
    Bcl.block(0, n_w + 1, n, 1) = Bu;
    Bcl.bottomLeftCorner(n, n_w) = Bw - L * Dyw;
    Bcl.block(n, n_w, n, 1) = -L;
    Matrix Ccl = Matrix::Zero(n_z + 2, 2 * n);
    Ccl.topLeftCorner(n_z, n) = Cz - Dzu * K;
    Ccl.topRightCorner(n_z, n) = Dzu * K * (I - Lf * Cy);
    Ccl.block(n_z, 0, 1, n) = -K;
    Ccl.block(n_z, n, 1, n) = K * (I - Lf * Cy);
    Ccl.block(n_z + 1, n, 1, n) = Cy;
    Matrix Dcl = Matrix::Zero(n_z + 2, n_w + 2);
    Dcl.topLeftCorner(n_z, n_w) = Dzw - Dzu * K * Lf * Dyw;
    Dcl.block(0, n_w, n_z, 1) = -Dzu * K * Lf;
    Dcl.block(0, n_w + 1, n_z, 1) = Dzu;
    Dcl.block(n_z, 0, 1, n_w) = -K * Lf * Dyw;
    Dcl(n_z, n_w) = (-K * Lf)(0, 0);
    Dcl(n_z, n_w + 1) = 1.0;
    Dcl.block(n_z + 1, 0, 1, n_w) = Dyw;
    Dcl(n_z + 1, n_w) = 1.0;
    d.loop_maps = StateSpaceSystem(Acl, Bcl, Ccl, Dcl);
  }

  std::vector<int> w_inputs(n_w);
  for (int j = 0; j < n_w; ++j) w_inputs[j] = j;
  std::vector<int> zu_outputs(n_z + 1);
  for (int i = 0; i <= n_z; ++i) zu_outputs[i] = i;
  d.closed_loop = select_outputs(select_inputs(d.loop_maps, w_inputs),
                                 zu_outputs);

  std::vector<int> z_outputs(n_z);
  for (int i = 0; i < n_z; ++i) z_outputs[i] = i;
  StateSpaceSystem zw = select_outputs(select_inputs(d.loop_maps, w_inputs),
                                       z_outputs);
  d.variance_floor = output_covariance(zw).trace();
  return d;
}

}  // namespace detail

/// Solves the delayed LQG problem for the plant with measurement delay h.
/// Throws if the augmented realization is not stabilizable from u or not
/// detectable from y.
inline DelayedLqgDesign solve_delayed_lqg(const TwoByTwoPlant& plant, int h) {
  if (h < 0) throw Error("solve_delayed_lqg: negative delay");
  StateSpaceSystem aug = plant.delayed_realization(h);
  const int n_w = plant.disturbance_dim();
  const int n_z = plant.performance_dim();
  const int n = aug.order();

  const Matrix A = aug.A;
  const Matrix Bw = aug.B.leftCols(n_w);
  const Matrix Bu = aug.B.col(n_w);
  const Matrix Cz = aug.C.topRows(n_z);
  const Matrix Cy = aug.C.row(n_z);
  const Matrix Dzu = aug.D.block(0, n_w, n_z, 1);
  const Matrix Dyw = aug.D.block(n_z, 0, 1, n_w);

  if (!is_stabilizable(A, Bu)) {
    throw Error(
        "solve_delayed_lqg: unstable mode unreachable from the control input");
  }
  if (!is_detectable(A, Cy)) {
    throw Error(
        "solve_delayed_lqg: unstable mode invisible at the measurement");
  }

  // Control Riccati with the performance weight z'z.
  const Matrix Qc = Cz.transpose() * Cz;
  const Matrix Rc = Dzu.transpose() * Dzu;
  const Matrix Sc = Cz.transpose() * Dzu;
  RiccatiSolution ctrl = solve_dare(A, Bu, Qc, Rc, Sc);

  // Filter Riccati (dual), regularized only if the innovation degenerates on
  // a noise-free measurement channel.
  Matrix Rv = Dyw * Dyw.transpose();
  Matrix Sv = Bw * Dyw.transpose();
  const Matrix Qv = Bw * Bw.transpose();
  Matrix Sigma;
  Matrix innovation;
  for (int attempt = 0; attempt < 2; ++attempt) {
    try {
      RiccatiSolution filt =
          solve_dare(A.transpose(), Cy.transpose(), Qv, Rv, Sv);
      Sigma = filt.P;
      innovation = Cy * Sigma * Cy.transpose() + Rv;
      if (innovation(0, 0) > 1e-12 * (1.0 + Sigma.norm())) break;
    } catch (const Error&) {
      if (attempt == 1) throw;
    }
    Rv(0, 0) += kMeasurementRegularizer;
  }
  if (innovation.size() == 0 || innovation(0, 0) <= 0.0) {
    throw Error("solve_delayed_lqg: degenerate innovation covariance");
  }

  Matrix L = (A * Sigma * Cy.transpose() + Sv) * innovation.inverse();
  Matrix Lf = Sigma * Cy.transpose() * innovation.inverse();

  DelayedLqgDesign d =
      detail::assemble_design(std::move(aug), n_w, n_z, h, ctrl.gain, L, Lf);
  if (!is_stable(d.closed_loop)) {
    throw Error("solve_delayed_lqg: assembled loop failed the stability check");
  }
  return d;
}

/// The performance floor D(h): infimum steady-state variance of z over
/// causal LTI controllers acting on h-delayed measurements.
inline PerformanceFloor performance_floor(const TwoByTwoPlant& plant, int h) {
  DelayedLqgDesign d = solve_delayed_lqg(plant, h);
  return PerformanceFloor{h, d.variance_floor, d.controller};
}

/// Steady-state variance of z under an arbitrary controller u = C(y), for
/// cross-checking returned designs. Errors if the loop is unstable.
inline double closed_loop_variance(const TwoByTwoPlant& plant, int h,
                                   const StateSpaceSystem& controller) {
  StateSpaceSystem aug = plant.delayed_realization(h);
  const int n_w = plant.disturbance_dim();
  const int n_z = plant.performance_dim();
  const int n = aug.order(), nc = controller.order();
  const Matrix A = aug.A;
  const Matrix Bw = aug.B.leftCols(n_w);
  const Matrix Bu = aug.B.col(n_w);
  const Matrix Cz = aug.C.topRows(n_z);
  const Matrix Cy = aug.C.row(n_z);
  const Matrix Dzw = aug.D.topLeftCorner(n_z, n_w);
  const Matrix Dzu = aug.D.block(0, n_w, n_z, 1);
  const Matrix Dyw = aug.D.block(n_z, 0, 1, n_w);

  // u = Cc xc + Dc y, y = Cy x + Dyw w (plant u -> y strictly proper).
  Matrix Acl = Matrix::Zero(n + nc, n + nc);
  Acl.topLeftCorner(n, n) = A + Bu * controller.D * Cy;
  Acl.topRightCorner(n, nc) = Bu * controller.C;
  Acl.bottomLeftCorner(nc, n) = controller.B * Cy;
  Acl.bottomRightCorner(nc, nc) = controller.A;
  Matrix Bcl(n + nc, n_w);
  Bcl.topRows(n) = Bw + Bu * controller.D * Dyw;
  Bcl.bottomRows(nc) = controller.B * Dyw;
  Matrix Ccl(n_z, n + nc);
  Ccl.leftCols(n) = Cz + Dzu * controller.D * Cy;
  Ccl.rightCols(nc) = Dzu * controller.C;
  Matrix Dcl = Dzw + Dzu * controller.D * Dyw;
  StateSpaceSystem cl(Acl, Bcl, Ccl, Dcl);
  if (!is_stable(cl)) {
    throw UnstableSystemError("closed_loop_variance: loop is unstable");
  }
  return output_covariance(cl).trace();
}

/// Internally stabilizing nominal controller for the h-delayed plant,
/// observer-based from the LQG Riccati solutions. For an open-loop stable
/// plant where the Riccati machinery degenerates, the zero controller is a
/// valid fallback.
inline StateSpaceSystem stabilizing_controller(const TwoByTwoPlant& plant,
                                               int h) {
  try {
    return solve_delayed_lqg(plant, h).controller;
  } catch (const Error&) {
    if (plant.open_loop_stable()) {
      return StateSpaceSystem::scalar_gain(0.0);
    }
    throw;
  }
}

}  // namespace ncsrate
