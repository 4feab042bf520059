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

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "p2tx/pose.hpp"

namespace p2tx {

struct ResampleSpec {
  FrameRate target_fps{25, 1};
};

// Natural cubic spline through equally spaced samples.
class NaturalCubicSpline {
 public:
  // Knots at x = 0, step, 2*step, ...; needs at least one sample.
  NaturalCubicSpline(std::span<const double> samples, double step);

  // Evaluates on [x_i, x_i + step] given the segment index and the offset
  // within it; splitting the position this way keeps knot hits exact.
  double eval(std::size_t segment, double offset) const;
  double operator()(double x) const;

  std::span<const double> second_derivatives() const { return m_; }

 private:
  std::vector<double> y_;
  std::vector<double> m_;
  double h_;
};

// Frame count after resampling: floor((T - 1) * target / source) + 1.
std::uint32_t resampled_frame_count(std::uint32_t frames, FrameRate source,
                                    FrameRate target);

// Resamples every coordinate and confidence track onto the target grid, with
// output frame 0 at source time 0. Confidence is clamped to [0,1];
// coordinates are clamped only when the input passes validate().
// Throws kInvalidArgument for a non-positive target rate.
PoseSequence resample(const PoseSequence& pose, const ResampleSpec& spec);

}  // namespace p2tx
