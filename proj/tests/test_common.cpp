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

#include <charconv>
#include <cmath>
#include <string>

#include "gaitforge/common.hpp"

namespace gf = gaitforge;

TEST(Common, MixSeedSeparatesStreams) {
  EXPECT_NE(gf::mix_seed(1, 2, 3), gf::mix_seed(1, 3, 2));
  EXPECT_NE(gf::mix_seed(0), gf::mix_seed(1));
  EXPECT_EQ(gf::mix_seed(7, 8, 9), gf::mix_seed(7, 8, 9));
}

TEST(Common, Uniform01InUnitInterval) {
  gf::Rng rng = gf::make_rng(3);
  double sum = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double u = gf::uniform01(rng);
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
  }
  EXPECT_NEAR(sum / 100000, 0.5, 5e-3);
}

TEST(Common, NormalPairMoments) {
  gf::Rng rng = gf::make_rng(11);
  double m = 0.0, v = 0.0, c = 0.0;
  const int n = 50000;
  for (int i = 0; i < n; ++i) {
    auto [a, b] = gf::standard_normal_pair(rng);
    ASSERT_TRUE(std::isfinite(a) && std::isfinite(b));
    m += a + b;
    v += a * a + b * b;
    c += a * b;
  }
  EXPECT_NEAR(m / (2 * n), 0.0, 0.02);
  EXPECT_NEAR(v / (2 * n), 1.0, 0.02);
  EXPECT_NEAR(c / n, 0.0, 0.02);
}

TEST(Common, WrapRanges) {
  for (double a = -20.0; a <= 20.0; a += 0.173) {
    const double p = gf::wrap_phase(a);
    EXPECT_GE(p, 0.0);
    EXPECT_LT(p, gf::kTwoPi);
    EXPECT_NEAR(std::remainder(p - a, gf::kTwoPi), 0.0, 1e-12);
    const double w = gf::wrap_angle(a);
    EXPECT_GT(w, -gf::kPi);
    EXPECT_LE(w, gf::kPi);
    EXPECT_NEAR(std::remainder(w - a, gf::kTwoPi), 0.0, 1e-12);
  }
  EXPECT_EQ(gf::wrap_angle(gf::kPi), gf::kPi);
  EXPECT_EQ(gf::wrap_phase(gf::kTwoPi), 0.0);
}

TEST(Common, FormatDoubleRoundTrips) {
  gf::Rng rng = gf::make_rng(5);
  for (int i = 0; i < 1000; ++i) {
    const double v = std::ldexp(gf::uniform(rng, -1.0, 1.0), static_cast<int>(gf::uniform(rng, -60, 60)));
    const std::string s = gf::format_double(v);
    double back = 0.0;
    std::from_chars(s.data(), s.data() + s.size(), back);
    ASSERT_EQ(back, v) << s;
  }
  EXPECT_EQ(gf::format_double(0.5), "0.5");
  EXPECT_EQ(gf::format_double(3.0), "3");
}
