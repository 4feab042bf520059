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

#include "p2tx/resample.hpp"

#include <algorithm>

#include "p2tx/error.hpp"

namespace p2tx {

NaturalCubicSpline::NaturalCubicSpline(std::span<const double> samples, double step)
    : y_(samples.begin(), samples.end()), m_(samples.size(), 0.0), h_(step) {
  if (y_.empty()) throw Error(ErrorCode::kInvalidArgument, "spline needs samples");
  if (!(h_ > 0.0)) throw Error(ErrorCode::kInvalidArgument, "spline step must be positive");
  const std::size_t n = y_.size();
  if (n < 3) return;  // natural ends: one or two knots are linear

  // Tridiagonal system for the interior second derivatives:
  //   m[i-1] + 4 m[i] + m[i+1] = 6 / h^2 * (y[i+1] - 2 y[i] + y[i-1]),
  // with m[0] = m[n-1] = 0. Thomas algorithm.
  const std::size_t k = n - 2;
  std::vector<double> upper(k), rhs(k);
  const double scale = 6.0 / (h_ * h_);
  for (std::size_t i = 0; i < k; ++i)
    rhs[i] = scale * ((y_[i + 2] - y_[i + 1]) - (y_[i + 1] - y_[i]));
  double denom = 4.0;
  upper[0] = 1.0 / denom;
  rhs[0] /= denom;
  for (std::size_t i = 1; i < k; ++i) {
    denom = 4.0 - upper[i - 1];
    upper[i] = 1.0 / denom;
    rhs[i] = (rhs[i] - rhs[i - 1]) / denom;
  }
  m_[k] = rhs[k - 1];
  for (std::size_t i = k - 1; i-- > 0;) m_[i + 1] = rhs[i] - upper[i] * m_[i + 2];
}

double NaturalCubicSpline::eval(std::size_t segment, double offset) const {
  const std::size_t n = y_.size();
  if (n == 1) return y_[0];
  if (segment >= n - 1) {
    // Past the last knot: extend the final segment.
    offset += static_cast<double>(segment - (n - 2)) * h_;
    segment = n - 2;
  }
  if (offset == 0.0) return y_[segment];
  const double y0 = y_[segment], y1 = y_[segment + 1];
  const double m0 = m_[segment], m1 = m_[segment + 1];
  const double b = (y1 - y0) / h_ - h_ * (2.0 * m0 + m1) / 6.0;
  const double c = m0 / 2.0;
  const double e = (m1 - m0) / (6.0 * h_);
  return y0 + offset * (b + offset * (c + offset * e));
}

double NaturalCubicSpline::operator()(double x) const {
  if (x <= 0.0 || y_.size() == 1) return eval(0, x);
  const auto segment = static_cast<std::size_t>(x / h_);
  return eval(segment, x - static_cast<double>(segment) * h_);
}

std::uint32_t resampled_frame_count(std::uint32_t frames, FrameRate source,
                                    FrameRate target) {
  if (!source.valid() || !target.valid())
    throw Error(ErrorCode::kInvalidArgument, "frame rates must be positive");
  // (T-1) * (tn/td) / (sn/sd) = (T-1) * tn * sd / (td * sn)
  const unsigned __int128 num = static_cast<unsigned __int128>(frames - 1) *
                                target.numerator * source.denominator;
  const unsigned __int128 den =
      static_cast<unsigned __int128>(target.denominator) * source.numerator;
  const auto count = num / den + 1;
  if (count > UINT32_MAX)
    throw Error(ErrorCode::kInvalidArgument, "resampled sequence too long");
  return static_cast<std::uint32_t>(count);
}

PoseSequence resample(const PoseSequence& pose, const ResampleSpec& spec) {
  const FrameRate src = pose.fps();
  const FrameRate dst = spec.target_fps;
  if (!dst.valid()) throw Error(ErrorCode::kInvalidArgument, "target fps must be positive");
  if (!src.valid()) throw Error(ErrorCode::kInvalidArgument, "source fps must be positive");

  const std::uint32_t t_in = pose.frames();
  const std::uint32_t t_out = resampled_frame_count(t_in, src, dst);
  PoseSequence out(dst, t_out, pose.keypoints(), pose.dims(), pose.components());
  const bool clamp_coords = validate(pose).empty();

  // Output frame j sits at source frame position j * P / Q (exact rational),
  // so the knot index and in-segment offset are computed without drift.
  const std::uint64_t p = std::uint64_t{src.numerator} * dst.denominator;
  const std::uint64_t q = std::uint64_t{src.denominator} * dst.numerator;
  std::vector<std::size_t> segment(t_out);
  std::vector<double> offset(t_out);
  for (std::uint32_t j = 0; j < t_out; ++j) {
    const unsigned __int128 pos = static_cast<unsigned __int128>(j) * p;
    segment[j] = static_cast<std::size_t>(pos / q);
    offset[j] = static_cast<double>(static_cast<std::uint64_t>(pos % q)) /
                static_cast<double>(q);
  }

  std::vector<double> track(t_in);
  auto run = [&](auto&& read, auto&& write) {
    for (std::uint32_t t = 0; t < t_in; ++t) track[t] = read(t);
    const NaturalCubicSpline spline(track, 1.0);
    for (std::uint32_t j = 0; j < t_out; ++j) write(j, spline.eval(segment[j], offset[j]));
  };

  for (std::uint32_t k = 0; k < pose.keypoints(); ++k) {
    for (std::uint32_t c = 0; c < pose.dims(); ++c) {
      run([&](std::uint32_t t) { return static_cast<double>(pose.coord(t, k, c)); },
          [&](std::uint32_t j, double v) {
            if (clamp_coords) v = std::clamp(v, 0.0, 1.0);
            out.coord(j, k, c) = static_cast<float>(v);
          });
    }
    run([&](std::uint32_t t) { return static_cast<double>(pose.confidence(t, k)); },
        [&](std::uint32_t j, double v) {
          out.confidence(j, k) = static_cast<float>(std::clamp(v, 0.0, 1.0));
        });
  }
  return out;
}

}  // namespace p2tx
