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

#include <complex>
#include <vector>

#include "ncsrate/common.hpp"
#include "ncsrate/lqg.hpp"
#include "ncsrate/plant.hpp"
#include "ncsrate/spectrum.hpp"

namespace ncsrate {

/// Quadratic function q |-> q'A q + 2 b'q + c of FIR coefficient vectors.
struct QuadraticForm {
  Matrix A;
  Vector b;
  double c = 0.0;

  double eval(const Vector& q) const {
    if (q.size() == 0) return c;
    return q.dot(A * q) + 2.0 * b.dot(q) + c;
  }

  /// Unconstrained minimizer of the form (A q = -b).
  Vector minimizer() const {
    if (b.size() == 0) return Vector(0);
    Eigen::LDLT<Matrix> ldlt(A);
    if (ldlt.info() != Eigen::Success) {
      Matrix jittered = A;
      jittered.diagonal().array() += 1e-13 * (1.0 + A.trace() / A.rows());
      ldlt.compute(jittered);
    }
    return ldlt.solve(-b);
  }
};

/// Minimize f + rho * g over the shared coefficient vector.
inline Vector minimize_weighted(const QuadraticForm& f, const QuadraticForm& g,
                                double rho) {
  QuadraticForm sum;
  sum.A = f.A + rho * g.A;
  sum.b = f.b + rho * g.b;
  sum.c = f.c + rho * g.c;
  return sum.minimizer();
}

/// Affine parameterization of every internally stabilizing controller for
/// the h-delay plant, anchored at the delayed LQG design, together with the
/// frequency-grid data used by the rate optimization.
///
/// The controller parameter Q is a scalar FIR filter acting on the
/// innovation sequence; the closed-loop maps from the disturbance to the
/// performance output and to the control signal are affine in its taps, and
/// every stable Q yields an internally stable loop by construction.
///
/// A second FIR block parameterizes the channel-noise recirculation transfer
/// seen by the loop. Its base point interpolates a zero at every unstable
/// plant pole with unit value at infinity, which is exactly the set of noise
/// responses an internally stable loop can realize.
struct YoulaProgram {
  DelayedLqgDesign nominal;
  SpectrumGrid grid{kDefaultGridSize};
  int n_q = 32;    // controller FIR order (taps 0..n_q)
  int n_psi = 32;  // recirculation FIR order

  // Grid responses. Columns index grid points.
  ComplexMatrix t3;        // w -> e, n_w rows
  ComplexMatrix u1;        // w -> u nominal, n_w rows
  ComplexVector u2;        // v -> u
  ComplexMatrix g12a;      // u -> z open loop (delayed plant), n_z rows
  ComplexVector g22a;      // u -> y open loop (delayed plant)
  ComplexVector e_m;       // measurement injection -> e (parameter-free)
  ComplexVector u_m0;      // measurement injection -> u at Q = 0
  ComplexVector psi0;      // recirculation base point
  Vector g12_weight;       // sum_i |g12a_i|^2 per grid point

  QuadraticForm vz;    // ||w -> z(q)||_2^2
  QuadraticForm pt;    // ||w -> u(q)||_2^2
  QuadraticForm epsi;  // ||Psi - 1||_2^2 over recirculation taps
  QuadraticForm npsi;  // ||G12a Psi||_2^2 over recirculation taps

  std::vector<std::complex<double>> unstable_poles;

  int q_taps() const { return n_q + 1; }
  int psi_taps() const { return n_psi + 1; }

  /// Scalar FIR response sum_i taps_i e^{-j omega (i + first_power)} at grid
  /// point index k, by Horner in e^{-j omega}.
  std::complex<double> fir_response(const Vector& taps, int k,
                                    int first_power = 0) const {
    const std::complex<double> zi = std::polar(1.0, -grid.omega(k));
    std::complex<double> acc(0.0, 0.0);
    for (Eigen::Index i = taps.size(); i-- > 0;) acc = acc * zi + taps(i);
    for (int i = 0; i < first_power; ++i) acc *= zi;
    return acc;
  }
};

namespace detail {

/// Toeplitz Gram A[k,l] = mean(weight * cos(omega (k-l))) plus linear term
/// b[k] = mean(Re(s * e^{-j omega (k + shift)})) and constant c. Both
/// correlations are one FFT over the grid.
inline QuadraticForm grid_quadratic_form(const SpectrumGrid& grid,
                                         const Vector& weight,
                                         const ComplexVector& s, double c,
                                         int taps, int shift = 0) {
  ComplexVector wc = fourier_coefficients(weight.cast<std::complex<double>>(),
                                          taps);
  ComplexVector sc = fourier_coefficients(s, taps + shift);
  QuadraticForm f;
  f.A.resize(taps, taps);
  for (int i = 0; i < taps; ++i)
    for (int j = 0; j < taps; ++j) f.A(i, j) = wc(std::abs(i - j)).real();
  f.b.resize(taps);
  for (int d = 0; d < taps; ++d) f.b(d) = sc(d + shift).real();
  f.c = c;
  return f;
}

/// Quadratic form over FIR taps for the weighted energy
/// mean( wt(omega) |base(omega) + mult(omega) q(omega)|^2 ) with
/// q(omega) = sum_k q_k e^{-j omega (k + shift)}.
inline QuadraticForm affine_quadratic_form(const SpectrumGrid& grid,
                                           const Vector& wt,
                                           const ComplexVector& base,
                                           const ComplexVector& mult, int taps,
                                           int shift = 0) {
  const int n = grid.size();
  Vector weight(n);
  ComplexVector s(n);
  double c = 0.0;
  for (int k = 0; k < n; ++k) {
    weight(k) = wt(k) * std::norm(mult(k));
    s(k) = wt(k) * std::conj(base(k)) * mult(k);
    c += wt(k) * std::norm(base(k));
  }
  c /= n;
  return grid_quadratic_form(grid, weight, s, c, taps, shift);
}

/// Base interpolant: product of (z - p)/(z - 1/p) over unstable poles. Unit
/// value at infinity, a zero at every unstable pole, all poles mirrored
/// inside the disk. Conjugate pole pairs keep the product real.
inline std::complex<double> interpolation_base(
    const std::vector<std::complex<double>>& poles, std::complex<double> z) {
  std::complex<double> acc(1.0, 0.0);
  for (const auto& p : poles) acc *= (z - p) / (z - 1.0 / std::conj(p));
  return acc;
}

}  // namespace detail

struct YoulaOptions {
  int n_q = 32;
  int n_psi = 32;
  int grid_size = kDefaultGridSize;
};

/// Builds the program around a nominal delayed LQG design. The nominal
/// design must stabilize the delay-augmented plant (guaranteed when it came
/// out of solve_delayed_lqg; checked again here).
inline YoulaProgram build_youla_program(const TwoByTwoPlant& plant, int h,
                                        const DelayedLqgDesign& nominal,
                                        const YoulaOptions& opts = {}) {
  if (nominal.delay != h) {
    throw Error("build_youla_program: nominal design has a different delay");
  }
  if (!is_stable(nominal.loop_maps)) {
    throw Error("build_youla_program: nominal controller is not stabilizing");
  }

  YoulaProgram prog;
  prog.nominal = nominal;
  prog.grid = SpectrumGrid(opts.grid_size);
  prog.n_q = opts.n_q;
  prog.n_psi = opts.n_psi;
  prog.unstable_poles = plant.unstable_poles();

  const int N = prog.grid.size();
  const int n_w = nominal.n_w;
  const int n_z = nominal.n_z;

  // One pass over the grid for every base response.
  FrequencyResponder loop(nominal.loop_maps);
  FrequencyResponder open_plant(nominal.plant);

  ComplexMatrix t1(n_z * n_w, N);
  prog.t3.resize(n_w, N);
  prog.u1.resize(n_w, N);
  prog.u2.resize(N);
  prog.g12a.resize(n_z, N);
  prog.g22a.resize(N);
  prog.e_m.resize(N);
  prog.u_m0.resize(N);
  prog.psi0.resize(N);
  prog.g12_weight.resize(N);

  ComplexMatrix t2(n_z, N);
  for (int k = 0; k < N; ++k) {
    const std::complex<double> z = prog.grid.point(k);
    const ComplexMatrix R = loop.eval(z);  // (n_z+2) x (n_w+2)
    for (int i = 0; i < n_z; ++i) {
      for (int j = 0; j < n_w; ++j) t1(i * n_w + j, k) = R(i, j);
      t2(i, k) = R(i, n_w + 1);
    }
    for (int j = 0; j < n_w; ++j) {
      prog.u1(j, k) = R(n_z, j);
      prog.t3(j, k) = R(n_z + 1, j);
    }
    prog.u2(k) = R(n_z, n_w + 1);
    prog.e_m(k) = R(n_z + 1, n_w);
    prog.u_m0(k) = R(n_z, n_w);

    const ComplexMatrix P = open_plant.eval(z);  // (n_z+1) x (n_w+1)
    double wsum = 0.0;
    for (int i = 0; i < n_z; ++i) {
      prog.g12a(i, k) = P(i, n_w);
      wsum += std::norm(P(i, n_w));
    }
    prog.g22a(k) = P(n_z, n_w);
    prog.g12_weight(k) = wsum;
    prog.psi0(k) = detail::interpolation_base(prog.unstable_poles, z);
  }

  // Quadratic form data for ||T1 + T2 q T3||^2 and ||U1 + U2 q T3||^2.
  Vector wz(N), wt(N);
  ComplexVector sz(N), st(N);
  double cz = 0.0, ct = 0.0;
  for (int k = 0; k < N; ++k) {
    const double t2n = t2.col(k).squaredNorm();
    const double t3n = prog.t3.col(k).squaredNorm();
    wz(k) = t2n * t3n;
    wt(k) = std::norm(prog.u2(k)) * t3n;
    std::complex<double> acc_z(0.0, 0.0), acc_t(0.0, 0.0);
    for (int j = 0; j < n_w; ++j) {
      for (int i = 0; i < n_z; ++i) {
        acc_z += std::conj(t1(i * n_w + j, k)) * t2(i, k) * prog.t3(j, k);
      }
      acc_t += std::conj(prog.u1(j, k)) * prog.u2(k) * prog.t3(j, k);
    }
    sz(k) = acc_z;
    st(k) = acc_t;
    cz += t1.col(k).squaredNorm();
    ct += prog.u1.col(k).squaredNorm();
  }
  cz /= N;
  ct /= N;
  prog.vz = detail::grid_quadratic_form(prog.grid, wz, sz, cz, prog.q_taps());
  prog.pt = detail::grid_quadratic_form(prog.grid, wt, st, ct, prog.q_taps());

  // Recirculation forms over Psi = psi0 (1 + z^{-1} Q_psi).
  Vector we(N), wn(N);
  ComplexVector se(N), sn(N);
  double ce = 0.0, cn = 0.0;
  for (int k = 0; k < N; ++k) {
    const double p0 = std::norm(prog.psi0(k));
    we(k) = p0;
    wn(k) = prog.g12_weight(k) * p0;
    se(k) = std::conj(prog.psi0(k) - 1.0) * prog.psi0(k);
    sn(k) = prog.g12_weight(k) * p0;
    ce += std::norm(prog.psi0(k) - 1.0);
    cn += wn(k);
  }
  ce /= N;
  cn /= N;
  prog.epsi = detail::grid_quadratic_form(prog.grid, we, se, ce,
                                          prog.psi_taps(), /*shift=*/1);
  prog.npsi = detail::grid_quadratic_form(prog.grid, wn, sn, cn,
                                          prog.psi_taps(), /*shift=*/1);
  return prog;
}

/// Pointwise closed-loop responses at the FIR parameter q, for checks and
/// design extraction.
struct ParameterizedResponses {
  ComplexVector q_of_omega;    // FIR response
  ComplexVector sensitivity;   // 1 + G22a * (measurement -> u)
  ComplexVector cs;            // measurement -> u
  ComplexMatrix t_u;           // w -> u rows
};

inline ParameterizedResponses evaluate_parameter(const YoulaProgram& prog,
                                                 const Vector& q) {
  const int N = prog.grid.size();
  ParameterizedResponses r;
  r.q_of_omega.resize(N);
  r.sensitivity.resize(N);
  r.cs.resize(N);
  r.t_u.resize(prog.nominal.n_w, N);
  for (int k = 0; k < N; ++k) {
    const std::complex<double> qk = prog.fir_response(q, k);
    r.q_of_omega(k) = qk;
    r.cs(k) = prog.u_m0(k) + prog.u2(k) * qk * prog.e_m(k);
    r.sensitivity(k) = 1.0 + prog.g22a(k) * r.cs(k);
    for (int j = 0; j < prog.nominal.n_w; ++j) {
      r.t_u(j, k) = prog.u1(j, k) + prog.u2(k) * qk * prog.t3(j, k);
    }
  }
  return r;
}

}  // namespace ncsrate
