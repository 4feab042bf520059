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

#include "p2tx/augment.hpp"

#include <cmath>

#include "p2tx/error.hpp"

namespace p2tx {

AugmentationParams sample_params(const AugmentationPolicy& policy, Rng& rng) {
  if (!(policy.sigma >= 0.0))
    throw Error(ErrorCode::kInvalidArgument, "augmentation sigma must be >= 0");
  AugmentationParams p;
  p.rotation_angle = policy.sigma * rng.normal();
  p.shear_factor = policy.sigma * rng.normal();
  p.scale_delta = policy.sigma * rng.normal();
  if (!policy.rotate) p.rotation_angle = 0.0;
  if (!policy.shear) p.shear_factor = 0.0;
  if (!policy.scale) p.scale_delta = 0.0;
  return p;
}

PoseSequence apply(const PoseSequence& pose, const AugmentationParams& params,
                   Point2 center) {
  if (!std::isfinite(params.rotation_angle) || !std::isfinite(params.shear_factor) ||
      !std::isfinite(params.scale_delta))
    throw Error(ErrorCode::kInvalidArgument, "augmentation parameters must be finite");
  const double s = 1.0 + params.scale_delta;
  if (!(std::abs(s) > 1e-6))
    throw Error(ErrorCode::kInvalidArgument, "degenerate scale factor");

  // A = S * Sh * R
  const double cs = std::cos(params.rotation_angle);
  const double sn = std::sin(params.rotation_angle);
  const double k = params.shear_factor;
  const double a00 = s * (cs + k * sn);
  const double a01 = s * (-sn + k * cs);
  const double a10 = s * sn;
  const double a11 = s * cs;

  PoseSequence out = pose;
  for (std::uint32_t t = 0; t < pose.frames(); ++t) {
    for (std::uint32_t kp = 0; kp < pose.keypoints(); ++kp) {
      const double dx = static_cast<double>(pose.coord(t, kp, 0)) - center.x;
      const double dy = static_cast<double>(pose.coord(t, kp, 1)) - center.y;
      out.coord(t, kp, 0) = static_cast<float>(center.x + a00 * dx + a01 * dy);
      out.coord(t, kp, 1) = static_cast<float>(center.y + a10 * dx + a11 * dy);
    }
  }
  return out;
}

}  // namespace p2tx
