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
#include <complex>
#include <vector>

#include "ncsrate/common.hpp"

namespace ncsrate {

/// A SISO rational transfer function in z with real coefficients, stored in
/// descending powers of z. The denominator is normalized to be monic on
/// construction and the filter must be proper (numerator degree does not
/// exceed denominator degree).
class RationalFilter {
 public:
  RationalFilter() : num_{0.0}, den_{1.0} {}

  RationalFilter(std::vector<double> num, std::vector<double> den)
      : num_(std::move(num)), den_(std::move(den)) {
    trim_leading_zeros(num_);
    trim_leading_zeros(den_);
    if (den_.empty() || den_[0] == 0.0) {
      throw Error("RationalFilter: denominator has no nonzero coefficient");
    }
    if (num_.empty()) num_ = {0.0};
    if (num_.size() > den_.size()) {
      throw Error(
          "RationalFilter: improper filter (numerator degree " +
          std::to_string(num_.size() - 1) + " exceeds denominator degree " +
          std::to_string(den_.size() - 1) + ")");
    }
    const double lead = den_[0];
    for (double& c : den_) c /= lead;
    for (double& c : num_) c /= lead;
  }

  static RationalFilter constant(double c) { return RationalFilter({c}, {1.0}); }
  static RationalFilter zero() { return RationalFilter(); }

  const std::vector<double>& numerator() const { return num_; }
  const std::vector<double>& denominator() const { return den_; }

  int degree() const { return static_cast<int>(den_.size()) - 1; }

  int numerator_degree() const {
    return is_zero() ? -1 : static_cast<int>(num_.size()) - 1;
  }

  bool is_zero() const {
    for (double c : num_) {
      if (c != 0.0) return false;
    }
    return true;
  }

  /// Relative degree strictly positive, i.e. vanishing response at z = inf.
  bool is_strictly_proper() const {
    return is_zero() || num_.size() < den_.size();
  }

  std::complex<double> eval(std::complex<double> z) const {
    return horner(num_, z) / horner(den_, z);
  }

 private:
  static std::complex<double> horner(const std::vector<double>& coeffs,
                                     std::complex<double> z) {
    std::complex<double> acc(0.0, 0.0);
    for (double c : coeffs) acc = acc * z + c;
    return acc;
  }

  static void trim_leading_zeros(std::vector<double>& coeffs) {
    std::size_t lead = 0;
    while (lead + 1 < coeffs.size() && coeffs[lead] == 0.0) ++lead;
    if (lead > 0) coeffs.erase(coeffs.begin(), coeffs.begin() + lead);
    if (coeffs.size() == 1 && coeffs[0] == 0.0) coeffs.clear();
  }

  std::vector<double> num_;
  std::vector<double> den_;
};

}  // namespace ncsrate
