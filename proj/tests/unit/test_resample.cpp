// Copyright 2026 The p2tx Authors
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

#include <cmath>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "p2tx/resample.hpp"
#include "test_util.hpp"

namespace p2tx {
namespace {

// Single-track pose holding `values` in coordinate 0 of keypoint 0.
PoseSequence track_pose(const std::vector<double>& values, FrameRate fps) {
  PoseSequence p(fps, static_cast<std::uint32_t>(values.size()), 1, 2);
  for (std::uint32_t t = 0; t < values.size(); ++t) p.coord(t, 0, 0) = static_cast<float>(values[t]);
  return p;
}

// Dense-solve oracle for the natural-spline second derivatives.
std::vector<double> dense_second_derivatives(const std::vector<double>& y, double h) {
  const auto n = static_cast<Eigen::Index>(y.size());
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
  a(0, 0) = 1.0;
  a(n - 1, n - 1) = 1.0;
  for (Eigen::Index i = 1; i + 1 < n; ++i) {
    a(i, i - 1) = h / 6.0;
    a(i, i) = 2.0 * h / 3.0;
    a(i, i + 1) = h / 6.0;
    b(i) = (y[i + 1] - y[i]) / h - (y[i] - y[i - 1]) / h;
  }
  const Eigen::VectorXd m = a.fullPivLu().solve(b);
  return {m.data(), m.data() + n};
}

TEST(Spline, SecondDerivativesMatchDenseSolve) {
  Rng rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 3 + rng.below(40);
    const double h = 0.1 + rng.uniform();
    std::vector<double> y(n);
    for (auto& v : y) v = rng.uniform(-2.0, 2.0);
    const NaturalCubicSpline s(y, h);
    const auto oracle = dense_second_derivatives(y, h);
    for (std::size_t i = 0; i < n; ++i)
      EXPECT_NEAR(s.second_derivatives()[i], oracle[i], 1e-9 * (1.0 + std::abs(oracle[i])));
  }
}

TEST(Spline, InterpolatesKnotsExactly) {
  const std::vector<double> y{0.3, -1.0, 2.5, 0.0, 4.0};
  const NaturalCubicSpline s(y, 0.5);
  for (std::size_t i = 0; i < y.size(); ++i) EXPECT_EQ(s.eval(i, 0.0), y[i]);
}

TEST(Spline, IsC2AtInteriorKnots) {
  const std::vector<double> y{0.0, 1.0, 0.5, 2.0, -1.0, 0.25};
  const double h = 1.0;
  const NaturalCubicSpline s(y, h);
  const double eps = 1e-5;
  for (std::size_t i = 1; i + 1 < y.size(); ++i) {
    const double x = static_cast<double>(i) * h;
    const double left_slope = (s(x) - s(x - eps)) / eps;
    const double right_slope = (s(x + eps) - s(x)) / eps;
    EXPECT_NEAR(left_slope, right_slope, 1e-3);
  }
}

TEST(Spline, EdgeSizes) {
  const std::vector<double> one{0.7};
  EXPECT_EQ(NaturalCubicSpline(one, 1.0)(3.0), 0.7);
  const std::vector<double> two{0.0, 1.0};
  EXPECT_DOUBLE_EQ(NaturalCubicSpline(two, 1.0)(0.25), 0.25);
  EXPECT_P2TX_ERROR(NaturalCubicSpline(std::vector<double>{}, 1.0), ErrorCode::kInvalidArgument);
}

TEST(FrameCount, MatchesFormula) {
  EXPECT_EQ(resampled_frame_count(11, {50, 1}, {25, 1}), 6u);
  EXPECT_EQ(resampled_frame_count(10, {50, 1}, {25, 1}), 5u);
  EXPECT_EQ(resampled_frame_count(1, {50, 1}, {25, 1}), 1u);
  EXPECT_EQ(resampled_frame_count(101, {30000, 1001}, {25, 1}), 84u);
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const auto t = 1 + static_cast<std::uint32_t>(rng.below(100000));
    EXPECT_EQ(resampled_frame_count(t, {50, 1}, {25, 1}), (t - 1) / 2 + 1);
  }
}

TEST(Resample, ConstantTrackStaysExact) {
  const auto out = resample(track_pose(std::vector<double>(11, 0.5), {50, 1}), {{25, 1}});
  ASSERT_EQ(out.frames(), 6u);
  for (std::uint32_t t = 0; t < out.frames(); ++t) EXPECT_EQ(out.coord(t, 0, 0), 0.5f);
  EXPECT_EQ(out.fps(), (FrameRate{25, 1}));
}

TEST(Resample, LinearRampStaysOnTheLine) {
  std::vector<double> ramp(26);
  for (std::size_t i = 0; i < ramp.size(); ++i) ramp[i] = static_cast<double>(i) / 25.0;
  const auto in = track_pose(ramp, {50, 1});
  const auto out = resample(in, {{25, 1}});
  ASSERT_EQ(out.frames(), 13u);
  for (std::uint32_t t = 0; t < out.frames(); ++t)
    EXPECT_EQ(out.coord(t, 0, 0), in.coord(2 * t, 0, 0));
}

TEST(Resample, LinearFunctionsReproducedAtFractionalPositions) {
  Rng rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    const double a = rng.uniform(-1, 1), b = rng.uniform(-1, 1);
    std::vector<double> y(37);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = a + b * static_cast<double>(i) / 30.0;
    const auto in = track_pose(y, {30, 1});
    const auto out = resample(in, {{25, 1}});
    for (std::uint32_t j = 0; j < out.frames(); ++j) {
      const double t = static_cast<double>(j) / 25.0;
      const double expected = a + b * t;
      // Valid inputs are clamped; compare against the clamped line.
      const double want = validate(in).empty() ? std::clamp(expected, 0.0, 1.0) : expected;
      EXPECT_NEAR(out.coord(j, 0, 0), want, 1e-6);
    }
  }
}

TEST(Resample, CubicMatchesAnalyticAwayFromEnds) {
  std::vector<double> y(101);
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double t = static_cast<double>(i) / 100.0;
    y[i] = t * t * t;
  }
  const auto out = resample(track_pose(y, {100, 1}), {{25, 1}});
  ASSERT_EQ(out.frames(), 26u);
  double worst = 0.0;
  for (std::uint32_t j = 1; j + 1 < out.frames(); ++j) {
    const double t = static_cast<double>(j) / 25.0;
    worst = std::max(worst, std::abs(out.coord(j, 0, 0) - t * t * t));
  }
  EXPECT_LT(worst, 1e-6);
}

TEST(Resample, FirstFrameIsCopiedExactly) {
  Rng rng(9);
  const auto in = testing::random_pose(rng, 17, 5, 3, {60, 1});
  const auto out = resample(in, {{25, 1}});
  for (std::uint32_t k = 0; k < 5; ++k) {
    for (std::uint32_t c = 0; c < 3; ++c) EXPECT_EQ(out.coord(0, k, c), in.coord(0, k, c));
    EXPECT_EQ(out.confidence(0, k), in.confidence(0, k));
  }
}

TEST(Resample, SameRateIsIdentity) {
  Rng rng(10);
  const auto in = testing::random_pose(rng, 12, 4, 2, {25, 1});
  const auto out = resample(in, {{50, 2}});
  ASSERT_EQ(out.frames(), in.frames());
  for (std::size_t i = 0; i < in.coords().size(); ++i)
    EXPECT_NEAR(out.coords()[i], in.coords()[i], 1e-6);
}

TEST(Resample, SingleFrameKeepsValuesWithNewRate) {
  Rng rng(12);
  const auto in = testing::random_pose(rng, 1, 3, 3, {50, 1});
  const auto out = resample(in, {{25, 1}});
  EXPECT_EQ(out.frames(), 1u);
  EXPECT_EQ(out.fps(), (FrameRate{25, 1}));
  EXPECT_TRUE(std::equal(in.coords().begin(), in.coords().end(), out.coords().begin()));
}

TEST(Resample, ConfidenceClampedCoordinatesOnlyForValidInput) {
  // Overshooting data: a spike makes the spline leave [0,1] between knots.
  std::vector<double> spike{0, 0, 1, 0, 0, 1, 1, 0};
  PoseSequence valid({10, 1}, 8, 1, 2);
  for (std::uint32_t t = 0; t < 8; ++t) {
    valid.coord(t, 0, 0) = static_cast<float>(spike[t]);
    valid.confidence(t, 0) = static_cast<float>(spike[t]);
  }
  const auto out = resample(valid, {{25, 1}});
  for (std::uint32_t t = 0; t < out.frames(); ++t) {
    EXPECT_GE(out.coord(t, 0, 0), 0.0f);
    EXPECT_LE(out.coord(t, 0, 0), 1.0f);
    EXPECT_GE(out.confidence(t, 0), 0.0f);
    EXPECT_LE(out.confidence(t, 0), 1.0f);
  }

  auto raw = valid;
  raw.coord(0, 0, 1) = 2.0f;  // out of range with confidence 0 -> still valid
  raw.confidence(0, 0) = 1.0f;  // now flagged
  ASSERT_FALSE(validate(raw).empty());
  const auto raw_out = resample(raw, {{25, 1}});
  bool below_zero = false;
  for (std::uint32_t t = 0; t < raw_out.frames(); ++t) below_zero |= raw_out.coord(t, 0, 0) < 0.0f;
  EXPECT_TRUE(below_zero);
}

TEST(Resample, CompositionKeepsFrameCountWithinOne) {
  Rng rng(13);
  for (int i = 0; i < 200; ++i) {
    const auto t = 1 + static_cast<std::uint32_t>(rng.below(5000));
    const auto direct = resampled_frame_count(t, {50, 1}, {25, 1});
    const auto via = resampled_frame_count(resampled_frame_count(t, {50, 1}, {100, 1}),
                                           {100, 1}, {25, 1});
    EXPECT_LE(std::max(direct, via) - std::min(direct, via), 1u);
  }
}

TEST(Resample, RejectsNonPositiveTarget) {
  PoseSequence p({25, 1}, 3, 1, 2);
  EXPECT_P2TX_ERROR(resample(p, {{0, 1}}), ErrorCode::kInvalidArgument);
  EXPECT_P2TX_ERROR(resample(p, {{25, 0}}), ErrorCode::kInvalidArgument);
}

TEST(Resample, Deterministic) {
  Rng rng(14);
  const auto in = testing::random_pose(rng, 40, 6, 3, {50, 1});
  EXPECT_EQ(resample(in, {{25, 1}}), resample(in, {{25, 1}}));
}

}  // namespace
}  // namespace p2tx
