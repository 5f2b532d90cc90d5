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

#include "ncsrate/lqg.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "ncsrate/io.hpp"
#include "test_util.hpp"

namespace ncsrate {
namespace {

TwoByTwoPlant example_plant() {
  // z = 0.165 / ((z-2)(z-0.5789)) * (w + u), y = z.
  RationalFilter p({0.165}, {1.0, -2.5789, 2.0 * 0.5789});
  return TwoByTwoPlant(p, p, p, p);
}

/// Monte Carlo steady-state variance of the first n_z outputs of a stable
/// realization driven by unit white noise.
double simulated_variance(const StateSpaceSystem& cl, int n_z, long steps,
                          unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vector x = Vector::Zero(cl.order());
  Vector w(cl.inputs());
  const long burn_in = std::max<long>(1000, 10 * cl.order());
  double acc = 0.0;
  long count = 0;
  for (long k = 0; k < steps + burn_in; ++k) {
    for (int i = 0; i < w.size(); ++i) w(i) = gauss(rng);
    Vector y = cl.C * x + cl.D * w;
    if (k >= burn_in) {
      acc += y.head(n_z).squaredNorm();
      ++count;
    }
    x = cl.A * x + cl.B * w;
  }
  return acc / count;
}

TEST(PlantModel, ExamplePlantRealizesMinimally) {
  TwoByTwoPlant p = example_plant();
  EXPECT_EQ(p.realization().order(), 2);
  EXPECT_FALSE(p.open_loop_stable());
  auto poles = p.unstable_poles();
  ASSERT_EQ(poles.size(), 1u);
  EXPECT_NEAR(std::abs(poles[0]), 2.0, 1e-9);
}

TEST(PlantModel, JsonRoundTrip) {
  const char* text = R"({
    "G11": {"num": [0.165], "den": [1.0, -2.5789, 1.1578]},
    "G12": {"num": [0.165], "den": [1.0, -2.5789, 1.1578]},
    "G21": {"num": [0.165], "den": [1.0, -2.5789, 1.1578]},
    "G22": {"num": [0.165], "den": [1.0, -2.5789, 1.1578]}
  })";
  TwoByTwoPlant p = plant_from_json(Json::parse(text));
  EXPECT_EQ(p.realization().order(), 2);
  TwoByTwoPlant q = plant_from_json(to_json(p));
  const std::complex<double> z(0.4, 0.3);
  EXPECT_LE((p.realization().eval(z) - q.realization().eval(z))
                .cwiseAbs()
                .maxCoeff(),
            1e-12);
}

TEST(PlantModel, RejectsBiproperG22) {
  RationalFilter biproper({1.0, 0.1}, {1.0, -0.5});
  RationalFilter ok({1.0}, {1.0, -0.5});
  EXPECT_THROW(TwoByTwoPlant(ok, ok, ok, biproper), Error);
}

TEST(PerformanceFloorTest, ScalarPlantClosedForm) {
  // x+ = a x + u + w1, y = x + c w2, z = x. Floor at h = 0:
  //   sigma_f = Sigma c^2 / (Sigma + c^2),  value = a^2 sigma_f + 1
  // with Sigma the one-step prediction Riccati solution.
  const double a = 0.9, c = 0.5;
  RationalFilter gx({1.0}, {1.0, -a});
  TwoByTwoPlant plant({{gx, RationalFilter::zero()}}, {gx},
                      {gx, RationalFilter::constant(c)}, gx);
  PerformanceFloor floor = performance_floor(plant, 0);

  // Riccati by scalar iteration: S = a^2 S - a^2 S^2/(S + c^2) + 1.
  double S = 1.0;
  for (int k = 0; k < 100000; ++k) {
    const double next = a * a * S - a * a * S * S / (S + c * c) + 1.0;
    if (std::abs(next - S) < 1e-15) {
      S = next;
      break;
    }
    S = next;
  }
  const double sigma_f = S * c * c / (S + c * c);
  const double want = a * a * sigma_f + 1.0;
  EXPECT_NEAR(floor.value, want, 1e-6 * want);
}

TEST(PerformanceFloorTest, ControlDecoupledOutput) {
  // G12 = 0 and stable G11: the control cannot touch z, the floor equals
  // ||G11||_2^2 for every delay.
  RationalFilter g11({1.0}, {1.0, -0.6});
  RationalFilter g2x({1.0}, {1.0, -0.4});
  TwoByTwoPlant plant(g11, RationalFilter::zero(), g2x, g2x);
  const double g11_energy = h2_norm_sq(realize(g11));
  for (int h : {0, 1, 3}) {
    PerformanceFloor floor = performance_floor(plant, h);
    EXPECT_NEAR(floor.value, g11_energy, 1e-9 * g11_energy) << "h=" << h;
  }
}

TEST(PerformanceFloorTest, ExamplePlantMonotoneInDelay) {
  TwoByTwoPlant plant = example_plant();
  double prev = -1.0;
  for (int h = 0; h <= 4; ++h) {
    PerformanceFloor floor = performance_floor(plant, h);
    EXPECT_GT(floor.value, prev) << "h=" << h;
    prev = floor.value;
  }
}

TEST(PerformanceFloorTest, ControllerAchievesFloorThroughLyapunov) {
  TwoByTwoPlant plant = example_plant();
  for (int h : {0, 2}) {
    PerformanceFloor floor = performance_floor(plant, h);
    const double achieved = closed_loop_variance(plant, h, floor.controller);
    EXPECT_GE(achieved, floor.value * (1.0 - 1e-9));
    EXPECT_NEAR(achieved, floor.value, 1e-6 * floor.value) << "h=" << h;
  }
}

TEST(PerformanceFloorTest, MonteCarloCrossCheck) {
  TwoByTwoPlant plant = example_plant();
  DelayedLqgDesign d = solve_delayed_lqg(plant, 0);
  const double mc =
      simulated_variance(d.closed_loop, plant.performance_dim(), 1000000, 42);
  EXPECT_NEAR(mc, d.variance_floor, 0.01 * d.variance_floor);
}

TEST(PerformanceFloorTest, DelayedControllersStabilize) {
  TwoByTwoPlant plant = example_plant();
  for (int h : {0, 4}) {
    StateSpaceSystem c = stabilizing_controller(plant, h);
    // Spectral radius of the interconnection, via the evaluation helper; it
    // throws on instability.
    EXPECT_NO_THROW(closed_loop_variance(plant, h, c)) << "h=" << h;
  }
}

TEST(PerformanceFloorTest, ZeroControllerValidForStablePlant) {
  std::mt19937_64 rng(31);
  RationalFilter g = testing::random_stable_filter(rng, 2);
  TwoByTwoPlant plant(g, g, g, RationalFilter({0.2}, {1.0, -0.3}));
  StateSpaceSystem zero = StateSpaceSystem::scalar_gain(0.0);
  EXPECT_NO_THROW(closed_loop_variance(plant, 1, zero));
}

TEST(PerformanceFloorTest, UnstabilizableFromControlRejected) {
  // Unstable mode reachable only from w: no controller can help.
  RationalFilter bad({1.0}, {1.0, -1.5});
  RationalFilter ok({1.0}, {1.0, -0.5});
  TwoByTwoPlant plant(bad, RationalFilter::zero(), bad, ok);
  EXPECT_THROW(performance_floor(plant, 0), Error);
}

}  // namespace
}  // namespace ncsrate
