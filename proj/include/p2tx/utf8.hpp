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

#include <string>
#include <string_view>
#include <vector>

namespace p2tx::utf8 {

// Invalid sequences decode to U+FFFD, one per offending byte.
std::u32string decode(std::string_view text);
std::string encode(std::u32string_view text);
std::string encode(char32_t cp);

// Splits into one UTF-8 string per code point.
std::vector<std::string> split_code_points(std::string_view text);

// Unicode general-category predicates (tables generated from the Unicode
// database by tools/gen_unicode_tables.py).
bool is_number(char32_t cp);       // N*
bool is_punctuation(char32_t cp);  // P*
bool is_symbol(char32_t cp);       // S*
bool is_space(char32_t cp);        // White_Space as used by str.split()

// Splits on runs of Unicode whitespace, dropping empty pieces.
std::vector<std::u32string> split_whitespace(std::u32string_view text);
std::vector<std::string> split_whitespace(std::string_view text);

}  // namespace p2tx::utf8
