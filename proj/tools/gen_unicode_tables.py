#!/usr/bin/env python3
# Copyright 2026 The p2tx Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Regenerates src/unicode_tables.inc.

Categories come from the third-party `regex` module (the engine used by the
reference BLEU tokenizer) so that \\p{N}, \\p{P} and \\p{S} agree exactly.
Whitespace follows Python's str.isspace(), which is what str.split() uses.
"""

import sys

import regex


def ranges(pred):
    out = []
    start = None
    for cp in range(0x110000):
        hit = pred(cp)
        if hit and start is None:
            start = cp
        elif not hit and start is not None:
            out.append((start, cp - 1))
            start = None
    if start is not None:
        out.append((start, 0x10FFFF))
    return out


def emit(name, rs, f):
    f.write(f"constexpr CodePointRange k{name}[] = {{\n")
    for lo, hi in rs:
        f.write(f"    {{0x{lo:X}, 0x{hi:X}}},\n")
    f.write("};\n\n")


def category(pattern):
    rx = regex.compile(pattern)

    def pred(cp):
        if 0xD800 <= cp <= 0xDFFF:
            return False
        return rx.match(chr(cp)) is not None

    return pred


LICENSE = """// Copyright 2026 The p2tx Authors
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

"""


def main(path):
    with open(path, "w", encoding="utf-8") as f:
        f.write(LICENSE + "\n")
        f.write("// Generated by tools/gen_unicode_tables.py; do not edit.\n")
        f.write(f"// regex module {regex.__version__}\n\n")
        emit("Number", ranges(category(r"\p{N}")), f)
        emit("Punctuation", ranges(category(r"\p{P}")), f)
        emit("Symbol", ranges(category(r"\p{S}")), f)
        emit("Space", ranges(lambda cp: chr(cp).isspace()), f)


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "src/unicode_tables.inc")
