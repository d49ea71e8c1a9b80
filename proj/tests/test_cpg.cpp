// Copyright 2026 The GaitForge Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "gaitforge/cpg.hpp"

namespace gf = gaitforge;
namespace cpg = gaitforge::cpg;
using gf::kPi;

namespace {

// Closed form of r'' = a(a/4 (R - r) - r') from rest.
double critically_damped(double R, double a, double t) {
  return R * (1.0 - std::exp(-a * t / 2.0) * (1.0 + a * t / 2.0));
}

cpg::CpgNetwork run(cpg::CpgNetwork net, double seconds, double dt = 1e-3) {
  const long n = std::lround(seconds / dt);
  for (long i = 0; i < n; ++i) net.step(dt);
  return net;
}

// A network of `n` oscillators with explicit weights, built directly from a
// CpgConfig (unused oscillators stay uncoupled at rest).
cpg::CpgNetwork bare(double omega, double R = 1.0) {
  cpg::CpgConfig cfg;
  cfg.target_frequency = omega;
  cfg.target_amplitudes.fill(R);
  return cpg::CpgNetwork(cfg, {});
}

const char* kGaits[] = {"tripod", "ripple", "wave", "four_two"};

}  // namespace

TEST(Cpg, CatalogOffsets) {
  const auto t = cpg::gait_from_name("tripod");
  EXPECT_EQ(t.name, cpg::GaitName::Tripod);
  const double tripod[] = {0, kPi, 0, kPi, 0, kPi};
  for (int l = 0; l < 6; ++l) EXPECT_DOUBLE_EQ(t.leg_phase_offsets[l], tripod[l]);
  const auto w = cpg::gait_from_name("Wave");
  for (int l = 0; l < 6; ++l) EXPECT_NEAR(w.leg_phase_offsets[l], l * kPi / 3.0, 1e-15);
  for (const char* g : kGaits) EXPECT_TRUE(cpg::gait_is_canonical(cpg::gait_from_name(g)));
  EXPECT_THROW(cpg::gait_from_name("turbo"), std::invalid_argument);
}

TEST(Cpg, ScheduleMapsToCatalog) {
  const double tri[] = {0, 0.5, 0, 0.5, 0, 0.5};
  auto [g, p] = cpg::gait_from_schedule(tri, 8 * kPi, 1.0);
  for (int l = 0; l < 6; ++l) EXPECT_NEAR(g.leg_phase_offsets[l], cpg::gait_from_name("tripod").leg_phase_offsets[l], 1e-15);
  EXPECT_EQ(p.amp_left, 1.0);
  EXPECT_EQ(p.amp_right, 1.0);
  EXPECT_EQ(p.frequency, 8 * kPi);

  const double wave[] = {0, 1.0 / 6, 2.0 / 6, 3.0 / 6, 4.0 / 6, 5.0 / 6};
  auto [gw, pw] = cpg::gait_from_schedule(wave, 8 * kPi, 1.0);
  for (int l = 0; l < 6; ++l) EXPECT_NEAR(gw.leg_phase_offsets[l], cpg::gait_from_name("wave").leg_phase_offsets[l], 1e-12);

  const double pronk[] = {0, 0, 0, 0, 0, 0};
  auto [gp, pp] = cpg::gait_from_schedule(pronk, 8 * kPi, 1.0);
  for (double o : gp.leg_phase_offsets) EXPECT_EQ(o, 0.0);

  // Shifting every start by the same fraction changes nothing after canonicalization.
  const double shifted[] = {0.25, 0.75, 0.25, 0.75, 0.25, 0.75};
  auto [gs, ps] = cpg::gait_from_schedule(shifted, 8 * kPi, 1.0);
  for (int l = 0; l < 6; ++l) EXPECT_NEAR(gs.leg_phase_offsets[l], g.leg_phase_offsets[l], 1e-12);

  const double bad[] = {0, 1.0, 0, 0, 0, 0};
  EXPECT_THROW(cpg::gait_from_schedule(bad, 8 * kPi, 1.0), std::invalid_argument);
}

TEST(Cpg, BuildNetworkTopology) {
  const auto net = cpg::build_network(cpg::gait_from_name("tripod"), {8 * kPi, 1.0, 0.3, 0.7});
  const auto& c = net.config();
  EXPECT_NEAR(c.phase_biases[0][1], kPi, 1e-15);
  for (int i = 0; i < cpg::kOscillators; ++i) {
    for (int j = 0; j < cpg::kOscillators; ++j) {
      EXPECT_EQ(c.coupling_weights[i][j] != 0.0, c.coupling_weights[j][i] != 0.0);
      if (c.coupling_weights[i][j] != 0.0) EXPECT_NEAR(c.phase_biases[i][j], -c.phase_biases[j][i], 1e-15);
    }
  }
  for (int leg = 0; leg < 6; ++leg) {
    const int h = cpg::horizontal_index(leg);
    int links = 0;
    for (int j = 0; j < cpg::kOscillators; ++j) links += c.coupling_weights[h][j] != 0.0;
    EXPECT_EQ(links, 1);
    EXPECT_EQ(c.coupling_weights[h][cpg::vertical_index(leg)], 4.0);
    const double amp = leg < 3 ? 0.3 : 0.7;
    EXPECT_EQ(c.target_amplitudes[h], amp);
    EXPECT_EQ(c.target_amplitudes[cpg::vertical_index(leg)], amp);
  }
  for (const auto& s : net.state()) {
    EXPECT_EQ(s.amplitude, 0.0);
    EXPECT_EQ(s.offset, 0.0);
  }
  const auto zero = cpg::build_network(cpg::gait_from_name("wave"), {8 * kPi, 1.0, 0.0, 0.0});
  for (double R : zero.config().target_amplitudes) EXPECT_EQ(R, 0.0);
}

TEST(Cpg, BuildNetworkRejectsBadInput) {
  cpg::GaitSpec g = cpg::gait_from_name("tripod");
  g.leg_phase_offsets[0] = 0.5;
  EXPECT_THROW(cpg::build_network(g, {}), std::invalid_argument);
  EXPECT_THROW(cpg::build_network(cpg::gait_from_name("tripod"), {100.0, 1.0, 1.0, 1.0}), std::invalid_argument);
  EXPECT_THROW(cpg::build_network(cpg::gait_from_name("tripod"), {8 * kPi, 1.0, 1.5, 1.0}), std::invalid_argument);
}

TEST(Cpg, UncoupledOscillatorPeriod) {
  auto net = run(bare(2 * kPi), 1.0);
  const double phi = net.state()[0].phase;
  EXPECT_LT(std::min(phi, 2 * kPi - phi), 1e-6);
}

TEST(Cpg, FrequencyCycleCount) {
  // Unwrapped phase over T = 3 s at ω = 5 rad/s.
  auto net = bare(5.0);
  double unwrapped = 0.0, prev = 0.0;
  for (int i = 0; i < 3000; ++i) {
    net.step(1e-3);
    const double phi = net.state()[0].phase;
    unwrapped += gf::wrap_angle(phi - prev);
    prev = phi;
  }
  const double cycles = unwrapped / (2 * kPi);
  EXPECT_NEAR(cycles, 5.0 * 3.0 / (2 * kPi), 1e-3 * 5.0 * 3.0 / (2 * kPi));
}

TEST(Cpg, AmplitudeClosedForm) {
  auto net = bare(1.0);
  for (int i = 0; i < 500; ++i) net.step(1e-3);
  EXPECT_NEAR(net.state()[0].amplitude, critically_damped(1.0, 20.0, 0.5), 1e-6);
  EXPECT_NEAR(1.0 - std::exp(-10 * 0.5) * (1 + 10 * 0.5), critically_damped(1.0, 20.0, 0.5), 1e-15);
}

TEST(Cpg, AmplitudeEnvelopeAndNonnegative) {
  const auto net0 = cpg::build_network(cpg::gait_from_name("ripple"), {8 * kPi, 1.0, 0.6, 0.9});
  auto net = net0;
  for (int n = 1; n <= 2000; ++n) {
    net.step(1e-3);
    const double t = n * 1e-3;
    const double bound = std::exp(-10.0 * t) * (1.0 + 10.0 * t);
    for (int i = 0; i < cpg::kOscillators; ++i) {
      const double R = net.config().target_amplitudes[i];
      ASSERT_GE(net.state()[i].amplitude, 0.0);
      ASSERT_LE(std::abs(net.state()[i].amplitude - R), R * bound + 1e-6);
      ASSERT_LE(std::abs(net.state()[i].offset), 1e-6);
    }
  }
}

TEST(Cpg, TwoOscillatorsLockToBias) {
  cpg::CpgConfig cfg;
  cfg.target_frequency = 3.0;
  cfg.target_amplitudes[0] = cfg.target_amplitudes[1] = 1.0;
  cfg.coupling_weights[0][1] = cfg.coupling_weights[1][0] = 4.0;
  cfg.phase_biases[0][1] = kPi;
  cfg.phase_biases[1][0] = -kPi;
  cpg::CpgNetwork::State st{};
  st[1].phase = 0.3;
  auto net = run(cpg::CpgNetwork(cfg, st), 5.0);
  const double d = gf::wrap_angle(net.state()[1].phase - net.state()[0].phase - kPi);
  EXPECT_LT(std::abs(d), 1e-2);
}

class PhaseLock : public ::testing::TestWithParam<std::tuple<const char*, double>> {};

TEST_P(PhaseLock, PerturbedStartLocksWithin5s) {
  const auto [name, omega] = GetParam();
  const auto gait = cpg::gait_from_name(name);
  auto net = cpg::build_network(gait, {std::clamp(omega, kPi, 16 * kPi), 1.2, 1.0, 1.0});
  gf::Rng rng = gf::make_rng(42);
  for (auto& s : net.mutable_state()) s.phase = gf::wrap_phase(s.phase + gf::uniform(rng, -1.0, 1.0));
  net = run(net, 5.0);
  for (int a = 0; a < 6; ++a) {
    for (int b = 0; b < 6; ++b) {
      const double d = net.state()[b].phase - net.state()[a].phase;
      EXPECT_LT(std::abs(gf::wrap_angle(d - net.config().phase_biases[a][b])), 1e-2) << a << "," << b;
    }
  }
}

INSTANTIATE_TEST_SUITE_P(Catalog, PhaseLock,
                         ::testing::Combine(::testing::ValuesIn(kGaits),
                                            ::testing::Values(kPi, 8 * kPi, 16 * kPi)));

TEST(Cpg, PiecewiseMotorMap) {
  cpg::OscillatorState v, h;
  v.amplitude = h.amplitude = 1.0;
  v.phase = h.phase = 1.5 * kPi;
  auto o = cpg::raw_leg_output(v, h);
  EXPECT_NEAR(o.vertical, 0.0, 1e-15);
  EXPECT_NEAR(o.horizontal, 0.0, 1e-15);
  v.phase = h.phase = 0.5 * kPi;
  o = cpg::raw_leg_output(v, h);
  EXPECT_EQ(o.vertical, 1.0);
  EXPECT_EQ(o.horizontal, 1.0);
  // Vertical active, horizontal holding: rapid retraction.
  v.phase = 1.5 * kPi;
  h.phase = 0.5 * kPi;
  o = cpg::raw_leg_output(v, h);
  EXPECT_EQ(o.horizontal, -1.0);
  // No amplitude: constant offset.
  v.amplitude = h.amplitude = 0.0;
  v.offset = h.offset = 0.2;
  for (double p : {0.1, 2.0, 4.0, 6.0}) {
    v.phase = h.phase = p;
    o = cpg::raw_leg_output(v, h);
    EXPECT_EQ(o.vertical, 0.2);
    EXPECT_EQ(o.horizontal, 0.2);
  }
}

TEST(Cpg, OutputWithinEnvelopeAndStroke) {
  gf::Rng rng = gf::make_rng(9);
  for (int i = 0; i < 10000; ++i) {
    cpg::OscillatorState v, h;
    v.phase = gf::uniform(rng, 0, 2 * kPi);
    h.phase = gf::uniform(rng, 0, 2 * kPi);
    v.amplitude = gf::uniform01(rng);
    h.amplitude = gf::uniform01(rng);
    const auto o = cpg::raw_leg_output(v, h);
    ASSERT_LE(std::abs(o.vertical - v.offset), v.amplitude + 1e-15);
    ASSERT_LE(std::abs(o.horizontal - h.offset), h.amplitude + 1e-15);
  }
  auto net = cpg::build_network(cpg::gait_from_name("wave"), {16 * kPi, 2.0, 1.0, 1.0});
  for (int n = 0; n < 1000; ++n) {
    net.step(1e-3);
    for (const auto& c : cpg::motor_output(net)) {
      ASSERT_GE(c.vertical, 0.0);
      ASSERT_LE(c.vertical, 1.0);
      ASSERT_GE(c.horizontal, 0.0);
      ASSERT_LE(c.horizontal, 1.0);
    }
  }
}

TEST(Cpg, DeterministicTrajectories) {
  const auto a = run(cpg::build_network(cpg::gait_from_name("ripple"), {20.0, 0.7, 0.4, 0.9}), 1.0);
  const auto b = run(cpg::build_network(cpg::gait_from_name("ripple"), {20.0, 0.7, 0.4, 0.9}), 1.0);
  std::ostringstream sa, sb;
  cpg::write_trajectory_rows(sa, a);
  cpg::write_trajectory_rows(sb, b);
  EXPECT_EQ(sa.str(), sb.str());
}

TEST(Cpg, StepRejectsBadDt) {
  auto net = bare(1.0);
  EXPECT_THROW(net.step(0.0), std::invalid_argument);
  EXPECT_THROW(net.step(6e-3), std::invalid_argument);
  EXPECT_NO_THROW(net.step(5e-3));
}

TEST(Cpg, NonFiniteStateFaults) {
  auto net = bare(1.0);
  net.mutable_state()[3].amplitude_rate = std::numeric_limits<double>::infinity();
  EXPECT_THROW(net.step(1e-3), cpg::IntegrationFault);
}

TEST(Cpg, TrajectoryDumpFormat) {
  std::ostringstream os;
  cpg::write_trajectory_header(os);
  cpg::write_trajectory_rows(os, bare(1.0));
  std::istringstream in(os.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "t,osc_id,phi,r,x,output");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 12);
}
