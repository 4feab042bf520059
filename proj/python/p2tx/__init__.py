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

"""Pose-to-text translation toolkit."""

from p2tx._p2tx import (
    Error,
    PoseSequence,
    Vocabulary,
    augment,
    bleu,
    chrf_pp,
    corpus_stats,
    flatten,
    param_count,
    read_pose,
    resample,
    resampled_frame_count,
    synthetic_corpus,
    tokenize_international,
    train_vocab,
    translate,
    validate,
    write_pose,
)

__all__ = [
    "Error",
    "PoseSequence",
    "Vocabulary",
    "augment",
    "bleu",
    "chrf_pp",
    "corpus_stats",
    "flatten",
    "param_count",
    "read_pose",
    "resample",
    "resampled_frame_count",
    "synthetic_corpus",
    "tokenize_international",
    "train_vocab",
    "translate",
    "validate",
    "write_pose",
]
