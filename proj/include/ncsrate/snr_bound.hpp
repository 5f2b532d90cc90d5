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

#include <algorithm>
#include <cmath>
#include <list>
#include <numbers>
#include <optional>
#include <vector>

#include "ncsrate/common.hpp"
#include "ncsrate/lqg.hpp"
#include "ncsrate/lyapunov.hpp"
#include "ncsrate/plant.hpp"
#include "ncsrate/youla.hpp"

namespace ncsrate {

// ---------------------------------------------------------------------------
// Coding-loop description: encoder with one-sample channel feedback, additive
// channel noise, decoder acting on the h-delayed channel output.
// ---------------------------------------------------------------------------

/// FIR filter as a state-space system; taps(i) multiplies z^{-(i +
/// first_power)}.
inline StateSpaceSystem fir_system(const Vector& taps, int first_power = 0) {
  const int m = static_cast<int>(taps.size()) + first_power;
  if (m <= 0) return StateSpaceSystem::scalar_gain(0.0);
  Vector c = Vector::Zero(m);
  for (int i = 0; i < taps.size(); ++i) c(i + first_power) = taps(i);
  const int n = m - 1;
  if (n == 0) return StateSpaceSystem::scalar_gain(c(0));
  Matrix A = Matrix::Zero(n, n);
  for (int i = 1; i < n; ++i) A(i, i - 1) = 1.0;
  Matrix B = Matrix::Zero(n, 1);
  B(0, 0) = 1.0;
  Matrix C(1, n);
  for (int i = 0; i < n; ++i) C(0, i) = c(i + 1);
  Matrix D(1, 1);
  D(0, 0) = c(0);
  return StateSpaceSystem(A, B, C, D);
}

/// One concrete coding scheme for the auxiliary loop: the encoder maps the
/// fed-back channel output and the measurement to the channel input,
///   t = B_r z^{-1} r + B_y y',
/// the channel adds noise of variance sigma_eta_sq (or a dithered quantizer
/// in the operational experiment), and the decoder applies J to the
/// h-delayed channel output.
///
/// The encoder is stored as one two-input realization (r, y') -> t with no
/// direct feedthrough from r; optimizer-produced schemes use an equivalent
/// controller/noise-shaper split whose separate B_r, B_y transfer functions
/// need not be individually stable even though the loop is.
struct LoopDesign {
  StateSpaceSystem encoder;  // inputs [r, y'] -> t, D(0,0) must vanish
  StateSpaceSystem decoder;  // r -> u'
  double sigma_eta_sq = 1.0;
  int delay = 0;

  static LoopDesign from_filters(const RationalFilter& br,
                                 const RationalFilter& by,
                                 const RationalFilter& j, double sigma_eta_sq,
                                 int delay) {
    LoopDesign d;
    d.encoder = hcat(series(unit_delay(1), realize(br)), realize(by));
    d.decoder = realize(j);
    d.sigma_eta_sq = sigma_eta_sq;
    d.delay = delay;
    return d;
  }

  /// Encoder written around an equivalent controller C and a strictly proper
  /// noise shaper W: t = C y' + W (r - t). The difference r - t is the
  /// channel noise, reconstructed at the encoder through the noiseless
  /// one-sample feedback.
  static LoopDesign from_controller_split(const StateSpaceSystem& c,
                                          const StateSpaceSystem& w,
                                          const StateSpaceSystem& decoder,
                                          double sigma_eta_sq, int delay) {
    if (w.D(0, 0) != 0.0) {
      throw Error("LoopDesign: noise shaper must be strictly proper");
    }
    const int nc = c.order(), nw = w.order();
    Matrix A = Matrix::Zero(nc + nw, nc + nw);
    A.topLeftCorner(nc, nc) = c.A;
    A.bottomLeftCorner(nw, nc) = -w.B * c.C;
    A.bottomRightCorner(nw, nw) = w.A - w.B * w.C;
    Matrix B = Matrix::Zero(nc + nw, 2);
    B.block(0, 1, nc, 1) = c.B;
    B.block(nc, 0, nw, 1) = w.B;
    B.block(nc, 1, nw, 1) = -w.B * c.D;
    Matrix C = Matrix::Zero(1, nc + nw);
    C.leftCols(nc) = c.C;
    C.rightCols(nw) = w.C;
    Matrix D = Matrix::Zero(1, 2);
    D(0, 1) = c.D(0, 0);
    LoopDesign d;
    d.encoder = StateSpaceSystem(A, B, C, D);
    d.decoder = decoder;
    d.sigma_eta_sq = sigma_eta_sq;
    d.delay = delay;
    return d;
  }
};

/// Joint realization of the auxiliary loop with stability-analysis
/// injections: inputs [eta, w, psi1, psi2] (channel noise, disturbance,
/// control-input injection, measurement injection), outputs
/// [z', y', r, u', t]. The delay sits inside the plant's control channel, so
/// u' here is the pre-delay control signal; all closed-loop transfer blocks
/// match the decoder-side-delay arrangement.
struct ClosedLoopMaps {
  StateSpaceSystem loop;
  int n_w = 0;
  int n_z = 0;
  bool stable = false;

  enum OutputGroup { kZ = 0, kY = 1, kR = 2, kU = 3, kT = 4 };
  enum InputGroup { kEta = 0, kW = 1, kPsi1 = 2, kPsi2 = 3 };

  std::vector<int> output_rows(int group) const {
    if (group == kZ) {
      std::vector<int> idx(n_z);
      for (int i = 0; i < n_z; ++i) idx[i] = i;
      return idx;
    }
    return {n_z + (group - 1)};
  }

  std::vector<int> input_cols(int group) const {
    if (group == kW) {
      std::vector<int> idx(n_w);
      for (int j = 0; j < n_w; ++j) idx[j] = 1 + j;
      return idx;
    }
    if (group == kEta) return {0};
    return {1 + n_w + (group - 2)};
  }

  StateSpaceSystem block(int output_group, int input_group) const {
    return select_outputs(select_inputs(loop, input_cols(input_group)),
                          output_rows(output_group));
  }
};

inline ClosedLoopMaps closed_loop_maps(const TwoByTwoPlant& plant,
                                       const LoopDesign& design) {
  const StateSpaceSystem pa = plant.delayed_realization(design.delay);
  const StateSpaceSystem& enc = design.encoder;
  const StateSpaceSystem& dec = design.decoder;
  const int n_w = plant.disturbance_dim();
  const int n_z = plant.performance_dim();

  if (enc.inputs() != 2 || enc.outputs() != 1) {
    throw Error("closed_loop_maps: encoder must map (r, y') to t");
  }
  if (dec.inputs() != 1 || dec.outputs() != 1) {
    throw Error("closed_loop_maps: decoder must be SISO");
  }
  if (enc.D(0, 0) != 0.0 || pa.D(n_z, n_w) != 0.0) {
    throw Error(
        "closed_loop_maps: algebraic loop through the channel is ill-posed");
  }

  const int np = pa.order(), ne = enc.order(), nj = dec.order();
  const int nx = np + ne + nj;
  const int nu = 1 + n_w + 2;  // [eta, w, psi1, psi2]
  const int kEtaCol = 0, kWCol = 1, kPsi1Col = 1 + n_w, kPsi2Col = 2 + n_w;

  using Row = Eigen::RowVectorXd;
  auto state_row = [&](const Matrix& c, int r, int offset) {
    Row out = Row::Zero(nx);
    out.segment(offset, c.cols()) = c.row(r);
    return out;
  };

  // Signal = (coefficients over states, coefficients over external inputs).
  struct Signal {
    Row x;
    Row u;
  };
  auto make = [&] { return Signal{Row::Zero(nx), Row::Zero(nu)}; };

  // y = Cy xP + Dyw w
  Signal y = make();
  y.x = state_row(pa.C, n_z, 0);
  y.u.segment(kWCol, n_w) = pa.D.row(n_z).head(n_w);

  Signal y_m = y;
  y_m.u(kPsi2Col) += 1.0;

  // t = C_E x_E + D_E(0,1) y_m
  Signal t = make();
  t.x = state_row(enc.C, 0, np);
  const double dey = enc.D(0, 1);
  t.x += dey * y_m.x;
  t.u += dey * y_m.u;

  Signal r = t;
  r.u(kEtaCol) += 1.0;

  // j = C_J x_J + D_J r
  Signal j = make();
  j.x = state_row(dec.C, 0, np + ne);
  j.x += dec.D(0, 0) * r.x;
  j.u += dec.D(0, 0) * r.u;

  Signal v = j;
  v.u(kPsi1Col) += 1.0;

  // State updates.
  Matrix A = Matrix::Zero(nx, nx);
  Matrix B = Matrix::Zero(nx, nu);
  A.topLeftCorner(np, np) = pa.A;
  B.block(0, kWCol, np, n_w) = pa.B.leftCols(n_w);
  A.topRows(np) += pa.B.col(n_w) * v.x;
  B.topRows(np) += pa.B.col(n_w) * v.u;

  A.block(np, np, ne, ne) = enc.A;
  A.middleRows(np, ne) += enc.B.col(0) * r.x + enc.B.col(1) * y_m.x;
  B.middleRows(np, ne) += enc.B.col(0) * r.u + enc.B.col(1) * y_m.u;

  A.block(np + ne, np + ne, nj, nj) = dec.A;
  A.bottomRows(nj) += dec.B * r.x;
  B.bottomRows(nj) += dec.B * r.u;

  // Outputs [z, y, r, v, t].
  Matrix C = Matrix::Zero(n_z + 4, nx);
  Matrix D = Matrix::Zero(n_z + 4, nu);
  for (int i = 0; i < n_z; ++i) {
    C.row(i) = state_row(pa.C, i, 0);
    D.block(i, kWCol, 1, n_w) = pa.D.row(i).head(n_w);
    const double dzv = pa.D(i, n_w);
    C.row(i) += dzv * v.x;
    D.row(i) += dzv * v.u;
  }
  C.row(n_z) = y.x;
  D.row(n_z) = y.u;
  C.row(n_z + 1) = r.x;
  D.row(n_z + 1) = r.u;
  C.row(n_z + 2) = v.x;
  D.row(n_z + 2) = v.u;
  C.row(n_z + 3) = t.x;
  D.row(n_z + 3) = t.u;

  ClosedLoopMaps maps;
  maps.loop = StateSpaceSystem(A, B, C, D);
  maps.n_w = n_w;
  maps.n_z = n_z;
  maps.stable = is_stable(maps.loop);
  return maps;
}

/// Channel SNR sigma_t^2 / sigma_eta^2 and steady-state performance variance
/// sigma_z'^2 of the auxiliary loop. Errors when the loop is not internally
/// stable.
inline std::pair<double, double> snr_and_variance(const TwoByTwoPlant& plant,
                                                  const LoopDesign& design) {
  ClosedLoopMaps maps = closed_loop_maps(plant, design);
  if (!maps.stable) {
    throw UnstableSystemError("snr_and_variance: loop is not internally stable");
  }
  const StateSpaceSystem& s = maps.loop;
  const int n_w = maps.n_w, n_z = maps.n_z;
  // One Gramian with the noise and disturbance channels at their actual
  // variances; the injection inputs carry none.
  Matrix Bn = s.B.col(0) * std::sqrt(design.sigma_eta_sq);
  Matrix Bw = s.B.middleCols(1, n_w);
  Matrix X = solve_discrete_lyapunov(s.A, Bn * Bn.transpose() +
                                              Bw * Bw.transpose());
  auto row_variance = [&](int row) {
    const double state_part = s.C.row(row) * X * s.C.row(row).transpose();
    const double d_eta = s.D(row, 0);
    const double d_w = s.D.row(row).segment(1, n_w).squaredNorm();
    return state_part + design.sigma_eta_sq * d_eta * d_eta + d_w;
  };
  double sigma_z = 0.0;
  for (int i = 0; i < n_z; ++i) sigma_z += row_variance(i);
  const double sigma_t = row_variance(n_z + 3);
  return {sigma_t / design.sigma_eta_sq, sigma_z};
}

// ---------------------------------------------------------------------------
// Rate lower-bound optimization.
// ---------------------------------------------------------------------------

struct RateSolveOptions {
  int n_q = 32;
  int n_psi = 32;
  int n_w_fir = 64;            // noise-shaper taps of the returned design
  int als_rounds = 40;         // block-coordinate refinement rounds
  int grid_size = kDefaultGridSize;
  bool adaptive_order = true;  // double n_q while the bound improves
  double adaptive_tol_bits = 1e-3;
  int max_n_q = 256;
  int max_bisect_iters = 53;
  double bisect_rel_tol = 1e-9;
  bool whiten = true;          // spectral flattening of the returned design
  int whitening_fir_order = 64;
};

/// One point of the rate-performance tradeoff. `phi` is the smallest channel
/// SNR certified by an explicit internally stable design meeting the
/// variance target, and the lower-bound rate is log2(1 + phi)/2 bits.
struct RatePoint {
  int delay = 0;
  double d_target = 0.0;
  double phi = 0.0;
  double phi_free = 0.0;   // free-interpolation indicator, phi >= this
  double rho_budget = 0.0; // disturbance SNR budget from the bisection
  double rate_lower_bits = 0.0;
  double sigma_eta_sq = 0.0;
  double sigma_z_analytic = 0.0;
  int n_q_used = 0;

  Vector q;      // controller FIR parameter
  Vector q_psi;  // recirculation parameter (program coordinates)
  Vector w_fir;  // noise-shaper taps of the design, tap i is z^{-(i+1)}
  Vector v_fir;  // whitening filter taps (v_0 = 1), empty when not applied
};

namespace detail {

/// Minimum-phase whitening filter for the sampled spectrum: V with V(inf)=1,
/// |V|^2 = c / S on the grid, via the cepstral method. Returns FIR taps
/// (v_0 = 1) or nothing if the truncated filter loses minimum phase.
inline std::optional<Vector> whitening_fir(const SpectrumGrid& grid,
                                           const Vector& spectrum, int order) {
  const int N = grid.size();
  ComplexVector logs(N);
  for (int k = 0; k < N; ++k) {
    logs(k) = std::log(std::max(spectrum(k), 1e-280));
  }
  // Cepstrum of the real even log-spectrum; gamma_m are its (real) series
  // coefficients. The canonical spectral factor is
  //   log F = gamma_0/2 + sum_{m>=1} gamma_m e^{-j m omega},
  // and V = F(inf)/F drops the constant term with a sign flip.
  ComplexVector gamma = fourier_coefficients(logs, N / 2 + 1);
  ComplexVector logv_coeffs = ComplexVector::Zero(N / 2 + 1);
  for (int m = 1; m < N / 2; ++m) logv_coeffs(m) = -gamma(m).real();
  logv_coeffs(N / 2) = -0.5 * gamma(N / 2).real();
  ComplexVector logv = evaluate_fourier_series(logv_coeffs, grid);
  ComplexVector v(N);
  for (int k = 0; k < N; ++k) v(k) = std::exp(logv(k));
  // Impulse response of the causal V, truncated.
  ComplexVector vtaps = fourier_coefficients(v, order + 1);
  Vector taps = vtaps.real();
  if (std::abs(taps(0)) < 1e-8) return std::nullopt;
  taps /= taps(0);
  // Minimum phase required so the decoder-side inverse is stable.
  StateSpaceSystem vs = fir_system(taps);
  StateSpaceSystem vinv = inverse(vs);
  if (!is_stable(vinv, 1e-6)) return std::nullopt;
  return taps;
}

struct StepA {
  double rho = 0.0;
  Vector q;
  double vz = 0.0;
  double pt = 0.0;
};

/// Feasibility of the SNR budget rho for the disturbance part:
/// exists q with P_t(q) <= rho (D - V_z(q)).
inline bool rho_feasible(const YoulaProgram& prog, double d_target, double rho,
                         Vector* q_out = nullptr) {
  Vector q;
  if (rho > 1.0) {
    QuadraticForm scaled;
    scaled.A = prog.vz.A + (1.0 / rho) * prog.pt.A;
    scaled.b = prog.vz.b + (1.0 / rho) * prog.pt.b;
    scaled.c = 0.0;
    q = scaled.minimizer();
  } else {
    q = minimize_weighted(prog.pt, prog.vz, rho);
  }
  const double value = prog.pt.eval(q) + rho * prog.vz.eval(q);
  if (q_out) *q_out = q;
  return value <= rho * d_target;
}

inline StepA solve_step_a(const YoulaProgram& prog, double d_target,
                          const RateSolveOptions& opts, double floor_value) {
  constexpr double kRhoCap = 1e18;
  constexpr double kRhoFloor = 1e-15;

  double hi = 1.0;
  Vector q_hi;
  while (!rho_feasible(prog, d_target, hi, &q_hi)) {
    hi *= 8.0;
    if (hi > kRhoCap) {
      throw InfeasibleError(
          "solve_rate_point: variance target is infeasible at tolerance "
          "(performance floor " +
              std::to_string(floor_value) + ")",
          floor_value);
    }
  }
  double lo = hi;
  while (lo > kRhoFloor && rho_feasible(prog, d_target, lo / 8.0)) lo /= 8.0;
  if (lo <= kRhoFloor && rho_feasible(prog, d_target, kRhoFloor, &q_hi)) {
    // Essentially no disturbance SNR is needed; keep the tiny-budget design.
    hi = kRhoFloor;
  } else {
    rho_feasible(prog, d_target, lo, &q_hi);
    hi = lo;
    lo = hi / 8.0;
    for (int it = 0; it < opts.max_bisect_iters &&
                     (hi - lo) > opts.bisect_rel_tol * hi;
         ++it) {
      const double mid = 0.5 * (hi + lo);
      Vector q_mid;
      if (rho_feasible(prog, d_target, mid, &q_mid)) {
        hi = mid;
        q_hi = q_mid;
      } else {
        lo = mid;
      }
    }
  }
  StepA out;
  out.rho = hi;
  out.q = q_hi;
  out.vz = prog.vz.eval(q_hi);
  out.pt = prog.pt.eval(q_hi);
  return out;
}

/// State of the block-coordinate design refinement: controller taps q, noise
/// shaper taps w, and the exact cost pieces at (q, w).
struct DesignState {
  Vector q;
  Vector w;
  double e = 0.0;   // ||Psi - 1||^2, Psi the noise recirculation response
  double n = 0.0;   // ||G12a Psi||^2, the noise path into z
  double p = 0.0;   // ||w -> t||^2
  double vz = 0.0;  // ||w -> z||^2
  ComplexVector psi;
  ComplexMatrix t_u;

  double phi(double d_target) const {
    if (n <= 0.0) return e;
    return e + p * n / (d_target - vz);
  }
};

inline DesignState evaluate_design(const YoulaProgram& prog, const Vector& q,
                                   const Vector& w) {
  DesignState st;
  st.q = q;
  st.w = w;
  ParameterizedResponses resp = evaluate_parameter(prog, q);
  const int N = prog.grid.size();
  st.psi.resize(N);
  st.t_u = resp.t_u;
  for (int k = 0; k < N; ++k) {
    const std::complex<double> sw = 1.0 + prog.fir_response(w, k, 1);
    st.psi(k) = resp.sensitivity(k) * sw;
    st.e += std::norm(st.psi(k) - 1.0);
    st.n += prog.g12_weight(k) * std::norm(st.psi(k));
    st.p += resp.t_u.col(k).squaredNorm();
  }
  st.e /= N;
  st.n /= N;
  st.p /= N;
  st.vz = prog.vz.eval(q);
  return st;
}

/// Alternating least squares on the exact design cost
///   phi(q, w) = ||S(q)(1+W) - 1||^2 + P_t(q) ||G12a S(q)(1+W)||^2 / (D - V_z(q)).
/// Each block step minimizes the Lagrangian with the noise level and its
/// multiplier refreshed from the current iterate; both steps are plain
/// linear solves. The controller step sees the recirculation cost, which is
/// what steers the loop's sensitivity away from gratuitous unstable zeros.
inline DesignState refine_design(const YoulaProgram& prog, double d_target,
                                 const Vector& q0, int w_taps, int max_rounds) {
  const int N = prog.grid.size();
  DesignState best = evaluate_design(prog, q0, Vector::Zero(w_taps));
  DesignState cur = best;

  for (int round = 0; round < max_rounds; ++round) {
    // Noise level and multiplier at the current iterate.
    double sigma2;
    double lambda;
    if (cur.n > 1e-14 * std::max(1.0, d_target)) {
      sigma2 = (d_target - cur.vz) / cur.n;
      lambda = cur.p / (sigma2 * sigma2 * cur.n);
    } else {
      sigma2 = 1e12 * std::max(1.0, d_target);
      lambda = 0.0;
    }

    // Controller step: S(q) = s_base + s_mult * q(omega), all weights fixed
    // at the current shaper.
    {
      ComplexVector s_base(N), s_mult(N), e_base(N), e_mult(N);
      Vector ones = Vector::Ones(N);
      for (int k = 0; k < N; ++k) {
        const std::complex<double> sw = 1.0 + prog.fir_response(cur.w, k, 1);
        const std::complex<double> sb = 1.0 + prog.g22a(k) * prog.u_m0(k);
        const std::complex<double> sm =
            prog.g22a(k) * prog.u2(k) * prog.e_m(k);
        s_base(k) = sb * sw;
        s_mult(k) = sm * sw;
        e_base(k) = sb * sw - 1.0;
        e_mult(k) = sm * sw;
      }
      QuadraticForm qf = affine_quadratic_form(prog.grid, ones, e_base, e_mult,
                                               prog.q_taps());
      QuadraticForm nf = affine_quadratic_form(
          prog.grid, prog.g12_weight, s_base, s_mult, prog.q_taps());
      QuadraticForm total;
      total.A = qf.A + (1.0 / sigma2) * prog.pt.A + lambda * prog.vz.A +
                (lambda * sigma2) * nf.A;
      total.b = qf.b + (1.0 / sigma2) * prog.pt.b + lambda * prog.vz.b +
                (lambda * sigma2) * nf.b;
      Vector q_new = total.minimizer();
      // Keep the variance margin; raise the multiplier if the step ate it.
      for (int bump = 0; bump < 8; ++bump) {
        if (prog.vz.eval(q_new) < d_target * (1.0 - 1e-9)) break;
        lambda = std::max(lambda * 10.0, 1e-6);
        total.A = qf.A + (1.0 / sigma2) * prog.pt.A + lambda * prog.vz.A +
                  (lambda * sigma2) * nf.A;
        total.b = qf.b + (1.0 / sigma2) * prog.pt.b + lambda * prog.vz.b +
                  (lambda * sigma2) * nf.b;
        q_new = total.minimizer();
      }
      if (prog.vz.eval(q_new) < d_target * (1.0 - 1e-9)) cur.q = q_new;
    }

    // Shaper step at the refreshed controller.
    {
      ParameterizedResponses resp = evaluate_parameter(prog, cur.q);
      ComplexVector base_e(N), mult(N);
      Vector ones = Vector::Ones(N), wn(N);
      for (int k = 0; k < N; ++k) {
        base_e(k) = resp.sensitivity(k) - 1.0;
        mult(k) = resp.sensitivity(k);
        wn(k) = prog.g12_weight(k);
      }
      QuadraticForm ef = affine_quadratic_form(prog.grid, ones, base_e, mult,
                                               w_taps, /*shift=*/1);
      QuadraticForm nf = affine_quadratic_form(prog.grid, wn, mult, mult,
                                               w_taps, /*shift=*/1);
      const double rho_w = lambda * sigma2;
      cur.w = minimize_weighted(ef, nf, rho_w);
    }

    cur = evaluate_design(prog, cur.q, cur.w);
    if (cur.phi(d_target) < best.phi(d_target)) {
      const double gain = best.phi(d_target) - cur.phi(d_target);
      best = cur;
      if (gain < 1e-9 * (1.0 + best.phi(d_target))) break;
    } else {
      break;
    }
  }
  return best;
}

}  // namespace detail

/// Smallest channel SNR compatible with sigma_z'^2 <= d_target over the
/// parameterized loop family, with the certifying design. The outer search
/// bisects the disturbance SNR budget (each test one least-squares solve in
/// the controller taps); the recirculation block then costs one more
/// least-squares solve. Requires d_target above the delayed performance
/// floor.
inline RatePoint solve_rate_point(const YoulaProgram& prog, double d_target,
                                  const RateSolveOptions& opts = {}) {
  const double floor_value = prog.nominal.variance_floor;
  if (d_target <= floor_value) {
    throw InfeasibleError(
        "solve_rate_point: target " + std::to_string(d_target) +
            " is not above the performance floor " +
            std::to_string(floor_value),
        floor_value);
  }

  detail::StepA a = detail::solve_step_a(prog, d_target, opts, floor_value);
  if (d_target - a.vz < 1e-12 * std::max(1.0, d_target)) {
    throw InfeasibleError(
        "solve_rate_point: variance margin underflows at tolerance",
        floor_value);
  }

  // Free-interpolation value of the recirculation block at the resolved
  // budget; a lower indicator for the refined design.
  Vector q_psi = minimize_weighted(prog.epsi, prog.npsi, a.rho);
  const double phi_free = prog.epsi.eval(q_psi) + a.rho * prog.npsi.eval(q_psi);

  detail::DesignState design =
      detail::refine_design(prog, d_target, a.q, opts.n_w_fir, opts.als_rounds);

  const int N = prog.grid.size();
  double sigma_eta_sq;
  if (design.n > 1e-14 * std::max(1.0, d_target)) {
    sigma_eta_sq = (d_target - design.vz) / design.n;
  } else {
    // The channel noise cannot reach z; any finite noise level does.
    sigma_eta_sq = 1e12 * std::max(1.0, d_target);
  }
  double phi = design.e + design.p / sigma_eta_sq;
  Vector v_fir;

  if (opts.whiten) {
    Vector s_r(N);
    for (int k = 0; k < N; ++k) {
      s_r(k) = std::norm(design.psi(k)) * sigma_eta_sq +
               design.t_u.col(k).squaredNorm();
    }
    auto taps = detail::whitening_fir(prog.grid, s_r, opts.whitening_fir_order);
    if (taps) {
      double e2 = 0.0, p2 = 0.0;
      for (int k = 0; k < N; ++k) {
        const std::complex<double> v = prog.fir_response(*taps, k);
        e2 += std::norm(design.psi(k) * v - 1.0);
        p2 += std::norm(v) * design.t_u.col(k).squaredNorm();
      }
      e2 /= N;
      p2 /= N;
      const double phi2 = e2 + p2 / sigma_eta_sq;
      // The noise path to z is untouched (the decoder inverts V exactly), so
      // sigma_eta and the variance budget stay as they are.
      if (phi2 < phi) {
        phi = phi2;
        v_fir = *taps;
      }
    }
  }

  RatePoint rp;
  rp.delay = prog.nominal.delay;
  rp.d_target = d_target;
  rp.phi = phi;
  rp.phi_free = phi_free;
  rp.rho_budget = a.rho;
  rp.rate_lower_bits = 0.5 * std::log2(1.0 + phi);
  rp.sigma_eta_sq = sigma_eta_sq;
  rp.sigma_z_analytic = design.vz + design.n * sigma_eta_sq;
  rp.n_q_used = prog.n_q;
  rp.q = design.q;
  rp.q_psi = q_psi;
  rp.w_fir = design.w;
  rp.v_fir = v_fir;
  return rp;
}

/// Joint feasibility test at a given SNR level: exists a design in the
/// program family with SNR <= phi and variance <= d_target. Used for
/// bracketing certificates around solved points.
inline bool snr_level_feasible(const YoulaProgram& prog, double d_target,
                               double phi) {
  // Largest recirculation budget rho with min_psi(E + rho N) <= phi, then
  // the disturbance part must fit inside it.
  auto g = [&](double rho) {
    Vector psi = minimize_weighted(prog.epsi, prog.npsi, rho);
    return prog.epsi.eval(psi) + rho * prog.npsi.eval(psi);
  };
  if (g(0.0) > phi) return false;
  double hi = 1.0;
  while (g(hi) <= phi && hi < 1e18) hi *= 8.0;
  double lo = hi / 8.0;
  if (g(hi) <= phi) {
    lo = hi;
  } else {
    for (int it = 0; it < 80 && (hi - lo) > 1e-9 * hi; ++it) {
      const double mid = 0.5 * (hi + lo);
      (g(mid) <= phi ? lo : hi) = mid;
    }
  }
  return detail::rho_feasible(prog, d_target, lo);
}

/// Rate solver with program caching and the order-doubling refinement.
class RateBoundSolver {
 public:
  RateBoundSolver(const TwoByTwoPlant& plant, int delay,
                  RateSolveOptions opts = {})
      : plant_(plant), delay_(delay), opts_(opts),
        nominal_(solve_delayed_lqg(plant, delay)) {}

  const DelayedLqgDesign& nominal() const { return nominal_; }
  double performance_floor() const { return nominal_.variance_floor; }
  const RateSolveOptions& options() const { return opts_; }

  /// Cached program per controller order; the list keeps references stable
  /// across refinements.
  const YoulaProgram& program(int n_q) {
    for (const auto& p : programs_) {
      if (p.n_q == n_q) return p;
    }
    YoulaOptions yo;
    yo.n_q = n_q;
    yo.n_psi = opts_.n_psi;
    yo.grid_size = opts_.grid_size;
    programs_.push_back(build_youla_program(plant_, delay_, nominal_, yo));
    return programs_.back();
  }

  RatePoint solve(double d_target) {
    RatePoint best = solve_rate_point(program(opts_.n_q), d_target, opts_);
    if (!opts_.adaptive_order) return best;
    int n_q = opts_.n_q;
    while (2 * n_q <= opts_.max_n_q) {
      n_q *= 2;
      RatePoint refined = solve_rate_point(program(n_q), d_target, opts_);
      const bool keep_going =
          best.rate_lower_bits - refined.rate_lower_bits > opts_.adaptive_tol_bits;
      if (refined.rate_lower_bits < best.rate_lower_bits) best = refined;
      if (!keep_going) break;
    }
    return best;
  }

 private:
  TwoByTwoPlant plant_;
  int delay_;
  RateSolveOptions opts_;
  DelayedLqgDesign nominal_;
  std::list<YoulaProgram> programs_;
};

/// Lower-bound curve over a grid of variance targets. Failed points are
/// skipped (reported by the harness); the rate is nonincreasing along
/// increasing targets by construction, since a design feasible at a smaller
/// target remains feasible at a larger one and is carried forward when the
/// fresh solve does not beat it.
inline std::vector<RatePoint> lower_bound_curve(RateBoundSolver& solver,
                                                const std::vector<double>& d_grid) {
  std::vector<double> sorted = d_grid;
  std::sort(sorted.begin(), sorted.end());
  std::vector<RatePoint> out;
  const RatePoint* prev = nullptr;
  for (double d : sorted) {
    RatePoint rp;
    try {
      rp = solver.solve(d);
    } catch (const InfeasibleError&) {
      continue;
    }
    if (prev && prev->phi < rp.phi) {
      rp = *prev;
      rp.d_target = d;
      rp.rate_lower_bits = 0.5 * std::log2(1.0 + rp.phi);
    }
    out.push_back(rp);
    prev = &out.back();
  }
  return out;
}

/// Controller realization for a solved parameter: the LQG observer loop plus
/// the FIR innovation term.
inline StateSpaceSystem make_controller(const DelayedLqgDesign& d,
                                        const Vector& q) {
  const int n = d.states();
  const int nq = static_cast<int>(q.size()) - 1;
  const Matrix A = d.A(), Bu = d.Bu(), Cy = d.Cy();
  const Matrix K = d.K, L = d.L, Lf = d.Lf;
  const Matrix I = Matrix::Identity(n, n);

  const int nx = n + nq;
  Matrix Ac = Matrix::Zero(nx, nx);
  Matrix Bc = Matrix::Zero(nx, 1);
  Matrix Cc = Matrix::Zero(1, nx);
  Matrix Dc = Matrix::Zero(1, 1);

  // e = y - Cy xp; xp+ = (A - Bu K) xp + (L - Bu K Lf) e + Bu (FIR e terms).
  const Matrix G = L - Bu * K * Lf + Bu * q(0);
  Ac.topLeftCorner(n, n) = A - Bu * K - G * Cy;
  Bc.topRows(n) = G;
  for (int i = 1; i <= nq; ++i) {
    Ac.block(0, n + i - 1, n, 1) = Bu * q(i);
  }
  if (nq > 0) {
    // FIR line of past innovations.
    Ac.block(n, 0, 1, n) = -Cy;
    Bc(n, 0) = 1.0;
    for (int i = 1; i < nq; ++i) Ac(n + i, n + i - 1) = 1.0;
  }
  Cc.leftCols(n) = -K * (I - Lf * Cy) - q(0) * Cy;
  for (int i = 1; i <= nq; ++i) Cc(0, n + i - 1) = q(i);
  Dc(0, 0) = (-K * Lf)(0, 0) + q(0);
  return StateSpaceSystem(Ac, Bc, Cc, Dc);
}

/// Concrete coding scheme realizing a solved rate point.
inline LoopDesign make_loop_design(const YoulaProgram& prog,
                                   const RatePoint& rp) {
  StateSpaceSystem c = make_controller(prog.nominal, rp.q);
  StateSpaceSystem w = fir_system(rp.w_fir, /*first_power=*/1);
  StateSpaceSystem decoder = StateSpaceSystem::scalar_gain(1.0);
  if (rp.v_fir.size() > 0) {
    StateSpaceSystem v = fir_system(rp.v_fir);
    c = series(c, v);
    Vector v_tail = rp.v_fir.tail(rp.v_fir.size() - 1);
    w = add(series(w, v), fir_system(v_tail, /*first_power=*/1));
    decoder = inverse(v);
  }
  return LoopDesign::from_controller_split(c, w, decoder, rp.sigma_eta_sq,
                                           rp.delay);
}

}  // namespace ncsrate
