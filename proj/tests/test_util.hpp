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

#include <random>

#include "ncsrate/state_space.hpp"

namespace ncsrate::testing {

/// Random strictly stable system with spectral radius <= rho_max.
inline StateSpaceSystem random_stable_system(std::mt19937_64& rng, int order,
                                             int inputs = 1, int outputs = 1,
                                             double rho_max = 0.9) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix A(order, order), B(order, inputs), C(outputs, order),
      D(outputs, inputs);
  for (int i = 0; i < order; ++i)
    for (int j = 0; j < order; ++j) A(i, j) = gauss(rng);
  if (order > 0) {
    double rho = spectral_radius(A);
    if (rho > 0) A *= (rho_max / rho) * std::uniform_real_distribution<double>(
                          0.3, 1.0)(rng);
  }
  for (int i = 0; i < order; ++i)
    for (int j = 0; j < inputs; ++j) B(i, j) = gauss(rng);
  for (int i = 0; i < outputs; ++i)
    for (int j = 0; j < order; ++j) C(i, j) = gauss(rng);
  for (int i = 0; i < outputs; ++i)
    for (int j = 0; j < inputs; ++j) D(i, j) = gauss(rng);
  return StateSpaceSystem(A, B, C, D);
}

/// Random stable proper SISO filter built from random stable poles and a
/// numerator of the same or lower degree.
inline RationalFilter random_stable_filter(std::mt19937_64& rng, int degree,
                                           bool strictly_proper = false,
                                           double pole_radius = 0.85) {
  std::uniform_real_distribution<double> uni(-pole_radius, pole_radius);
  std::vector<double> den = {1.0};
  for (int i = 0; i < degree; ++i) {
    // Multiply by (z - p) with a random real pole p.
    const double p = uni(rng);
    std::vector<double> next(den.size() + 1, 0.0);
    for (std::size_t j = 0; j < den.size(); ++j) {
      next[j] += den[j];
      next[j + 1] -= p * den[j];
    }
    den = next;
  }
  std::normal_distribution<double> gauss(0.0, 1.0);
  const int num_len = strictly_proper ? degree : degree + 1;
  std::vector<double> num(std::max(num_len, 1), 0.0);
  for (double& c : num) c = gauss(rng);
  return RationalFilter(num, den);
}

/// Sum of squared impulse-response entries, truncated where the running tail
/// bound drops below `tail`. Brute-force oracle for the Lyapunov-based H2.
inline double impulse_energy(const StateSpaceSystem& s, double tail = 1e-15,
                             int max_samples = 2000000) {
  double total = s.D.squaredNorm();
  Matrix X = s.B;
  const double rho = s.order() ? spectral_radius(s.A) : 0.0;
  for (int k = 1; k < max_samples; ++k) {
    const Matrix g = s.C * X;
    const double e = g.squaredNorm();
    total += e;
    // Geometric tail estimate once the response decays.
    if (k > 10 && rho < 1.0 && e / (1.0 - rho * rho) < tail) break;
    X = s.A * X;
  }
  return total;
}

}  // namespace ncsrate::testing
