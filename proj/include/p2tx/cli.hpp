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

// The `p2tx` command line: one binary, one subcommand per pipeline stage.
// Results go to stdout as JSON; failures print {"error": ..., "message": ...}
// to stderr and exit nonzero.

#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "p2tx/pose.hpp"
#include "p2tx/trainer.hpp"

namespace p2tx {

// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;  // runtime or data error
inline constexpr int kExitUsage = 2;    // bad flags or config

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

// *.pose files of a directory in name order; a regular file is returned as
// is.
std::vector<std::filesystem::path> list_pose_files(const std::filesystem::path& path);

// Poses (resampled to `target_fps` where needed) with aligned text lines.
// Throws kInvalidArgument when the counts differ.
Dataset load_split(const std::filesystem::path& poses, const std::filesystem::path& text,
                   FrameRate target_fps, std::vector<std::string> components);

}  // namespace p2tx
