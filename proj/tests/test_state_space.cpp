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

#include "ncsrate/state_space.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <complex>
#include <random>

#include "ncsrate/rational.hpp"
#include "ncsrate/spectrum.hpp"
#include "test_util.hpp"

namespace ncsrate {
namespace {

TEST(RationalFilter, NormalizesDenominatorToMonic) {
  RationalFilter f({2.0, 4.0}, {2.0, 1.0});
  EXPECT_DOUBLE_EQ(f.denominator()[0], 1.0);
  EXPECT_DOUBLE_EQ(f.denominator()[1], 0.5);
  EXPECT_DOUBLE_EQ(f.numerator()[0], 1.0);
  EXPECT_DOUBLE_EQ(f.numerator()[1], 2.0);
}

TEST(RationalFilter, RejectsImproper) {
  EXPECT_THROW(RationalFilter({1.0, 0.0, 0.0}, {1.0, 0.5}), Error);
  EXPECT_THROW(RationalFilter({1.0}, {0.0}), Error);
}

TEST(RationalFilter, StrictProperness) {
  EXPECT_TRUE(RationalFilter({1.0}, {1.0, -0.5}).is_strictly_proper());
  EXPECT_FALSE(RationalFilter({1.0, 0.0}, {1.0, -0.5}).is_strictly_proper());
  EXPECT_TRUE(RationalFilter::zero().is_strictly_proper());
}

TEST(Realize, ConstantFilterHasNoStates) {
  StateSpaceSystem s = realize(RationalFilter::constant(3.5));
  EXPECT_EQ(s.order(), 0);
  EXPECT_DOUBLE_EQ(s.D(0, 0), 3.5);
}

TEST(Realize, FirstOrderCanonicalForm) {
  StateSpaceSystem s = realize(RationalFilter({1.0}, {1.0, -0.5}));
  ASSERT_EQ(s.order(), 1);
  EXPECT_DOUBLE_EQ(s.A(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(s.B(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(s.C(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(s.D(0, 0), 0.0);
}

TEST(Realize, UnstableSecondOrderEigenvalues) {
  // 0.165 / ((z - 2)(z - 0.5789))
  StateSpaceSystem s =
      realize(RationalFilter({0.165}, {1.0, -2.5789, 2.0 * 0.5789}));
  ASSERT_EQ(s.order(), 2);
  Eigen::VectorXcd eig = eigenvalues(s.A);
  std::vector<double> mags = {std::abs(eig(0)), std::abs(eig(1))};
  std::sort(mags.begin(), mags.end());
  EXPECT_NEAR(mags[0], 0.5789, 1e-12);
  EXPECT_NEAR(mags[1], 2.0, 1e-12);
}

TEST(Realize, FrequencyResponseRoundTrip) {
  std::mt19937_64 rng(7);
  SpectrumGrid grid(1024);
  for (int trial = 0; trial < 20; ++trial) {
    RationalFilter f = testing::random_stable_filter(rng, 1 + trial % 5);
    StateSpaceSystem s = realize(f);
    FrequencyResponder fr(s);
    for (int k = 0; k < grid.size(); k += 37) {
      const std::complex<double> z = grid.point(k);
      const std::complex<double> want = f.eval(z);
      const std::complex<double> got = fr.eval(z)(0, 0);
      EXPECT_LE(std::abs(got - want), 1e-9 * (1.0 + std::abs(want)))
          << "trial " << trial << " k " << k;
    }
  }
}

TEST(Stability, SimpleCases) {
  EXPECT_TRUE(is_stable(realize(RationalFilter({1.0}, {1.0, -0.5}))));
  EXPECT_FALSE(is_stable(
      realize(RationalFilter({0.165}, {1.0, -2.5789, 2.0 * 0.5789}))));
}

TEST(Stability, MarginBoundary) {
  // Complex pair at radius 0.999999999 = 1 - 1e-9 is not strictly inside the
  // default margin.
  const double r = 1.0 - 1e-9;
  Matrix A(2, 2);
  A << 0.0, r, -r, 0.0;
  StateSpaceSystem s(A, Matrix::Zero(2, 1), Matrix::Zero(1, 2),
                     Matrix::Zero(1, 1));
  EXPECT_FALSE(is_stable(s));
  Matrix A2 = A * 0.99;
  EXPECT_TRUE(is_stable(StateSpaceSystem(A2, Matrix::Zero(2, 1),
                                         Matrix::Zero(1, 2),
                                         Matrix::Zero(1, 1))));
}

TEST(Interconnect, SeriesMatchesPointwiseProduct) {
  std::mt19937_64 rng(11);
  StateSpaceSystem s1 = testing::random_stable_system(rng, 3);
  StateSpaceSystem s2 = testing::random_stable_system(rng, 2);
  StateSpaceSystem prod = series(s1, s2);
  const std::complex<double> z(0.3, 0.8);
  const auto want = s2.eval(z)(0, 0) * s1.eval(z)(0, 0);
  EXPECT_LE(std::abs(prod.eval(z)(0, 0) - want), 1e-12 * (1.0 + std::abs(want)));
}

TEST(Interconnect, InverseOneMinusClosesLoop) {
  std::mt19937_64 rng(13);
  StateSpaceSystem L = testing::random_stable_system(rng, 3);
  L.D(0, 0) = 0.25;
  StateSpaceSystem cl = inverse_one_minus(L);
  const std::complex<double> z(0.9, 0.1);
  const auto want = 1.0 / (1.0 - L.eval(z)(0, 0));
  EXPECT_LE(std::abs(cl.eval(z)(0, 0) - want), 1e-11 * (1.0 + std::abs(want)));
}

TEST(Interconnect, InverseOneMinusRejectsSingularLoop) {
  StateSpaceSystem L = StateSpaceSystem::scalar_gain(1.0);
  EXPECT_THROW(inverse_one_minus(L), Error);
}

TEST(Interconnect, BiproperInverse) {
  std::mt19937_64 rng(17);
  StateSpaceSystem s = testing::random_stable_system(rng, 4);
  s.D(0, 0) = 2.0;
  StateSpaceSystem si = inverse(s);
  const std::complex<double> z(0.2, 0.95);
  const auto prod = s.eval(z)(0, 0) * si.eval(z)(0, 0);
  EXPECT_LE(std::abs(prod - 1.0), 1e-11);
}

TEST(Delay, ZeroDelayIsIdentity) {
  std::mt19937_64 rng(19);
  StateSpaceSystem s = testing::random_stable_system(rng, 3);
  StateSpaceSystem d = delay_augment(s, 0);
  EXPECT_EQ(d.order(), s.order());
  EXPECT_TRUE(d.A.isApprox(s.A));
}

TEST(Delay, PureDelayImpulse) {
  StateSpaceSystem g = StateSpaceSystem::scalar_gain(1.0);
  StateSpaceSystem d = delay_augment(g, 3);
  auto h = impulse_response(d, 6);
  for (int k = 0; k < 6; ++k) {
    EXPECT_DOUBLE_EQ(h[k](0, 0), k == 3 ? 1.0 : 0.0) << "k=" << k;
  }
}

TEST(Delay, StrictlyProperPlantPlusDelayZeros) {
  // Relative degree 2 plus two delays: first four impulse samples vanish,
  // i.e. samples 0..2 are zero and the response starts at k = 4.
  StateSpaceSystem g22 =
      realize(RationalFilter({0.165}, {1.0, -2.5789, 2.0 * 0.5789}));
  StateSpaceSystem d = delay_augment(g22, 2);
  auto h = impulse_response(d, 5);
  for (int k = 0; k < 4; ++k) EXPECT_EQ(h[k](0, 0), 0.0) << "k=" << k;
  EXPECT_NE(h[4](0, 0), 0.0);
}

TEST(Delay, FrequencyResponseShift) {
  std::mt19937_64 rng(23);
  StateSpaceSystem s = testing::random_stable_system(rng, 4);
  const int h = 3;
  StateSpaceSystem d = delay_augment(s, h);
  SpectrumGrid grid(256);
  FrequencyResponder fs(s), fd(d);
  for (int k = 0; k < grid.size(); k += 17) {
    const std::complex<double> z = grid.point(k);
    const auto want = fs.eval(z)(0, 0) * std::pow(z, -h);
    EXPECT_LE(std::abs(fd.eval(z)(0, 0) - want), 1e-12 * (1.0 + std::abs(want)));
  }
}

TEST(MinimalRealization, CollapsesDuplicatedDynamics) {
  // Two stacked copies of the same SISO system driven by the same input and
  // summed at the output reduce to a single copy with doubled gain.
  StateSpaceSystem s = realize(RationalFilter({1.0}, {1.0, -0.5}));
  StateSpaceSystem dup = add(s, s);
  EXPECT_EQ(dup.order(), 2);
  StateSpaceSystem min = minimal_realization(dup);
  EXPECT_EQ(min.order(), 1);
  const std::complex<double> z(0.7, 0.2);
  EXPECT_LE(std::abs(min.eval(z)(0, 0) - dup.eval(z)(0, 0)), 1e-10);
}

TEST(MinimalRealization, KeepsUnstableSharedModesOnce) {
  RationalFilter p({0.165}, {1.0, -2.5789, 2.0 * 0.5789});
  StateSpaceSystem s = realize(p);
  // [p p; p p] built from four copies has McMillan degree 2.
  StateSpaceSystem row1 = hcat(s, s);
  StateSpaceSystem row2 = hcat(s, s);
  StateSpaceSystem full = vcat(row1, row2);
  EXPECT_EQ(full.order(), 8);
  StateSpaceSystem min = minimal_realization(full);
  EXPECT_EQ(min.order(), 2);
  const std::complex<double> z(0.1, 0.4);
  EXPECT_LE((min.eval(z) - full.eval(z)).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(MinimalRealization, PreservesResponseOnRandomPaddedSystems) {
  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 10; ++trial) {
    StateSpaceSystem s = testing::random_stable_system(rng, 4, 2, 2);
    // Pad with unreachable junk states; the response must be preserved.
    StateSpaceSystem junk = testing::random_stable_system(rng, 3, 2, 2);
    junk.B.setZero();
    junk.D.setZero();
    StateSpaceSystem padded = add(s, junk);
    StateSpaceSystem min = minimal_realization(padded);
    EXPECT_LE(min.order(), 4);
    const std::complex<double> z(0.25, 0.6);
    EXPECT_LE((min.eval(z) - padded.eval(z)).cwiseAbs().maxCoeff(), 1e-8);
  }
}

}  // namespace
}  // namespace ncsrate
