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

#include <stdexcept>
#include <string>

namespace ncsrate {

/// Margin on the spectral radius below which a discrete-time system is
/// considered strictly stable. Distinguishes marginally stable numerical
/// artifacts from designed stable loops.
inline constexpr double kStabilityMargin = 1e-9;

/// Relative rank tolerance for subspace computations (minimal realization,
/// PBH tests).
inline constexpr double kRankTolerance = 1e-9;

/// Default frequency grid size for spectral quadrature.
inline constexpr int kDefaultGridSize = 1 << 14;

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Thrown when an operation that is only defined for stable systems is
/// applied to an unstable one (H2 norms, steady-state variances).
class UnstableSystemError : public Error {
 public:
  explicit UnstableSystemError(const std::string& what) : Error(what) {}
};

/// Thrown when a requested performance level is not achievable, e.g. a
/// variance target at or below the delayed-feedback floor. Carries the floor
/// value for diagnostics.
class InfeasibleError : public Error {
 public:
  InfeasibleError(const std::string& what, double floor)
      : Error(what), floor_(floor) {}
  double floor() const { return floor_; }

 private:
  double floor_;
};

/// Thrown by time-domain simulations whose state grows beyond the divergence
/// guard. Carries the step index at which the guard tripped.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, long step)
      : Error(what), step_(step) {}
  long step() const { return step_; }

 private:
  long step_;
};

}  // namespace ncsrate
