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

#include <cmath>
#include <numbers>
#include <vector>

#include "ncsrate/common.hpp"
#include "ncsrate/state_space.hpp"

namespace ncsrate {

/// Uniform frequency grid omega_k = -pi + 2 pi k / N, k = 0..N-1. N must be a
/// power of two. On this grid the trapezoid rule over a full period reduces
/// to the plain sample mean, with spectral accuracy for smooth integrands.
class SpectrumGrid {
 public:
  explicit SpectrumGrid(int size = kDefaultGridSize) : size_(size) {
    if (size < 2 || (size & (size - 1)) != 0) {
      throw Error("SpectrumGrid: size must be a power of two >= 2");
    }
  }

  int size() const { return size_; }

  double omega(int k) const {
    return -std::numbers::pi + 2.0 * std::numbers::pi * k / size_;
  }

  std::complex<double> point(int k) const {
    return std::polar(1.0, omega(k));
  }

 private:
  int size_;
};

/// (1/2pi) * integral over [-pi, pi) by the periodic trapezoid rule.
inline double grid_mean(const Vector& samples) {
  return samples.mean();
}

namespace detail {

/// Radix-2 FFT. Forward computes X_m = sum_k a_k e^{+2 pi j k m / N};
/// invert computes (1/N) sum_k a_k e^{-2 pi j k m / N}.
inline void fft_inplace(std::vector<std::complex<double>>& a, bool invert) {
  const int n = static_cast<int>(a.size());
  for (int i = 1, j = 0; i < n; ++i) {
    int bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (int len = 2; len <= n; len <<= 1) {
    const double ang = 2.0 * std::numbers::pi / len * (invert ? -1.0 : 1.0);
    const std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (int i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (int j = 0; j < len / 2; ++j) {
        const std::complex<double> u = a[i + j];
        const std::complex<double> v = a[i + j + len / 2] * w;
        a[i + j] = u + v;
        a[i + j + len / 2] = u - v;
        w *= wl;
      }
    }
  }
  if (invert) {
    for (auto& x : a) x /= n;
  }
}

}  // namespace detail

/// c_m = mean_k f(omega_k) e^{-+ j m omega_k} for m = 0..count-1. With the
/// positive exponent this extracts the coefficient of e^{-j m omega} in a
/// causal series, i.e. its impulse response. The grid origin at -pi
/// contributes the alternating sign.
inline ComplexVector fourier_coefficients(const ComplexVector& samples,
                                          int count,
                                          bool positive_exponent = false) {
  const int n = static_cast<int>(samples.size());
  std::vector<std::complex<double>> a(samples.data(), samples.data() + n);
  detail::fft_inplace(a, /*invert=*/!positive_exponent);
  ComplexVector out(count);
  const double scale = positive_exponent ? 1.0 / n : 1.0;
  for (int m = 0; m < count; ++m) {
    out(m) = scale * ((m % 2 == 0) ? a[m % n] : -a[m % n]);
  }
  return out;
}

/// values(k) = sum_m c_m e^{-j m omega_k} on the grid, for a coefficient
/// array shorter than the grid (zero padded).
inline ComplexVector evaluate_fourier_series(const ComplexVector& coeffs,
                                             const SpectrumGrid& grid) {
  const int n = grid.size();
  if (coeffs.size() > n) {
    throw Error("evaluate_fourier_series: more coefficients than grid points");
  }
  std::vector<std::complex<double>> a(n, std::complex<double>(0.0, 0.0));
  for (int m = 0; m < coeffs.size(); ++m) {
    a[m] = (m % 2 == 0) ? coeffs(m) : -coeffs(m);
  }
  detail::fft_inplace(a, /*invert=*/true);
  ComplexVector out(n);
  for (int k = 0; k < n; ++k) out(k) = a[k] * static_cast<double>(n);
  return out;
}

/// Samples of a SISO filter response on the grid.
inline ComplexVector sample_response(const RationalFilter& f,
                                     const SpectrumGrid& grid) {
  ComplexVector out(grid.size());
  for (int k = 0; k < grid.size(); ++k) out(k) = f.eval(grid.point(k));
  return out;
}

/// Samples of one scalar entry of a state-space response on the grid.
inline ComplexVector sample_response(const StateSpaceSystem& s,
                                     const SpectrumGrid& grid, int out = 0,
                                     int in = 0) {
  FrequencyResponder fr(s);
  ComplexVector v(grid.size());
  for (int k = 0; k < grid.size(); ++k) v(k) = fr.eval(grid.point(k))(out, in);
  return v;
}

/// One white-noise source feeding a sampled filter response.
struct PsdTerm {
  ComplexVector response;
  double variance = 1.0;
};

/// Steady-state output PSD of independent white sources through LTI filters:
/// S(omega_k) = sum_i sigma_i^2 |F_i(e^{j omega_k})|^2.
inline Vector psd_output(const std::vector<PsdTerm>& terms) {
  if (terms.empty()) throw Error("psd_output: no contributing terms");
  const Eigen::Index n = terms.front().response.size();
  Vector s = Vector::Zero(n);
  for (const PsdTerm& t : terms) {
    if (t.response.size() != n) throw Error("psd_output: grid size mismatch");
    if (t.variance < 0.0) throw Error("psd_output: negative input variance");
    s += t.variance * t.response.cwiseAbs2();
  }
  return s;
}

/// One white-noise source feeding an LTI filter given as a realization.
struct PsdSource {
  StateSpaceSystem filter;  // SISO
  double variance = 1.0;
};

/// As above, but samples the filters itself and rejects unstable ones.
inline Vector psd_output(const std::vector<PsdSource>& sources,
                         const SpectrumGrid& grid) {
  std::vector<PsdTerm> terms;
  terms.reserve(sources.size());
  for (const PsdSource& src : sources) {
    if (!is_stable(src.filter)) {
      throw UnstableSystemError("psd_output: contributing filter is unstable");
    }
    terms.push_back({sample_response(src.filter, grid), src.variance});
  }
  return psd_output(terms);
}

}  // namespace ncsrate
