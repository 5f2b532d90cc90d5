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

#include "ncsrate/lyapunov.hpp"

#include <gtest/gtest.h>

#include <random>

#include "ncsrate/spectrum.hpp"
#include "test_util.hpp"

namespace ncsrate {
namespace {

TEST(H2Norm, FirstOrderGeometricSeries) {
  StateSpaceSystem s = realize(RationalFilter({1.0}, {1.0, -0.5}));
  EXPECT_NEAR(h2_norm_sq(s), 4.0 / 3.0, 1e-12);
}

TEST(H2Norm, ConstantGain) {
  StateSpaceSystem s = realize(RationalFilter::constant(2.5));
  EXPECT_DOUBLE_EQ(h2_norm_sq(s), 6.25);
}

TEST(H2Norm, SecondOrderAgainstImpulseSum) {
  // (z - 0.2) / ((z - 0.5)(z - 0.3))
  RationalFilter f({1.0, -0.2}, {1.0, -0.8, 0.15});
  StateSpaceSystem s = realize(f);
  const double oracle = testing::impulse_energy(s, 1e-15);
  EXPECT_NEAR(h2_norm_sq(s), oracle, 1e-9 * (1.0 + oracle));
}

TEST(H2Norm, UnstableSystemRejected) {
  StateSpaceSystem s =
      realize(RationalFilter({0.165}, {1.0, -2.5789, 2.0 * 0.5789}));
  EXPECT_THROW(h2_norm_sq(s), UnstableSystemError);
}

TEST(H2Norm, LyapunovMatchesImpulseEnergyOnRandomSystems) {
  std::mt19937_64 rng(101);
  for (int trial = 0; trial < 100; ++trial) {
    const int order = 1 + trial % 6;
    StateSpaceSystem s = testing::random_stable_system(
        rng, order, 1 + trial % 2, 1 + (trial / 2) % 2);
    const double lyap = h2_norm_sq(s);
    const double brute = testing::impulse_energy(s, 1e-15);
    EXPECT_NEAR(lyap, brute, 1e-9 * (1.0 + brute)) << "trial " << trial;
  }
}

TEST(H2Norm, DelayAugmentationPreservesEnergy) {
  std::mt19937_64 rng(103);
  for (int trial = 0; trial < 20; ++trial) {
    StateSpaceSystem s = testing::random_stable_system(rng, 1 + trial % 5);
    const double base = h2_norm_sq(s);
    for (int h : {1, 3, 7}) {
      EXPECT_NEAR(h2_norm_sq(delay_augment(s, h)), base, 1e-12 * (1.0 + base));
    }
  }
}

TEST(Psd, ConstantGainPsd) {
  SpectrumGrid grid(64);
  Vector s = psd_output({{StateSpaceSystem::scalar_gain(2.0), 1.0}}, grid);
  for (int k = 0; k < grid.size(); ++k) EXPECT_DOUBLE_EQ(s(k), 4.0);
}

TEST(Psd, ParsevalMatchesLyapunovVariance) {
  SpectrumGrid grid(1 << 14);
  StateSpaceSystem s = realize(RationalFilter({1.0}, {1.0, -0.5}));
  Vector psd = psd_output({{s, 1.0}}, grid);
  EXPECT_NEAR(grid_mean(psd), 4.0 / 3.0, 1e-6);
}

TEST(Psd, ParsevalOnRandomSystems) {
  std::mt19937_64 rng(107);
  SpectrumGrid grid(1 << 14);
  for (int trial = 0; trial < 5; ++trial) {
    StateSpaceSystem s = testing::random_stable_system(rng, 2 + trial);
    Vector psd = psd_output({{s, 1.0}}, grid);
    const double var = h2_norm_sq(s);
    EXPECT_NEAR(grid_mean(psd), var, 1e-6 * (1.0 + var)) << "trial " << trial;
  }
}

TEST(Psd, IndependentSourcesAdd) {
  std::mt19937_64 rng(109);
  SpectrumGrid grid(256);
  StateSpaceSystem f1 = testing::random_stable_system(rng, 2);
  StateSpaceSystem f2 = testing::random_stable_system(rng, 3);
  Vector joint = psd_output({{f1, 1.0}, {f2, 1.0}}, grid);
  Vector s1 = psd_output({{f1, 1.0}}, grid);
  Vector s2 = psd_output({{f2, 1.0}}, grid);
  EXPECT_LE((joint - s1 - s2).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Psd, UnstableSourceRejected) {
  SpectrumGrid grid(64);
  StateSpaceSystem bad =
      realize(RationalFilter({0.165}, {1.0, -2.5789, 2.0 * 0.5789}));
  EXPECT_THROW(psd_output({{bad, 1.0}}, grid), UnstableSystemError);
}

TEST(Grid, ConjugateSymmetryOfRealFilterResponses) {
  std::mt19937_64 rng(113);
  SpectrumGrid grid(128);
  RationalFilter f = testing::random_stable_filter(rng, 4);
  ComplexVector r = sample_response(f, grid);
  // omega_k and omega_{N-k} are negatives of each other for k >= 1.
  for (int k = 1; k < grid.size(); ++k) {
    EXPECT_LE(std::abs(r(k) - std::conj(r(grid.size() - k))), 1e-12);
  }
}

TEST(Grid, RejectsNonPowerOfTwo) {
  EXPECT_THROW(SpectrumGrid(100), Error);
  EXPECT_THROW(SpectrumGrid(0), Error);
}

}  // namespace
}  // namespace ncsrate
