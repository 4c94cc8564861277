// Copyright 2026-present the tqa project
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
#include <string>
#include <vector>

#include "tqa/core.h"

namespace tqa {

/// A generated corpus with question splits. dev_tables holds only the
/// tables that the dev questions refer to (gold and their distractors).
struct SyntheticSet {
    Corpus tables;
    Corpus dev_tables;
    std::vector<QAExample> train;
    std::vector<QAExample> dev;
    std::vector<QAExample> test;
};

/// Generates distinct pronounceable nonsense words (six letters or more).
class WordForge {
public:
    explicit WordForge(uint64_t seed);

    std::string
    next();

private:
    Rng rng_;
    std::vector<std::string> used_;
};

/// Each question owns a unique two-word key that appears in its gold
/// table's title. Every question also has `distractors` tables that share
/// exactly one of its key words. Tables beyond the gold ones are the
/// distractor tables, each carrying several key words of different questions.
struct KeySetOptions {
    size_t num_questions = 100;
    size_t num_tables = 200;
    size_t distractors = 5;
    size_t train = 60;
    size_t dev = 10;
    size_t test = 30;
    uint64_t seed = 7;
};

SyntheticSet
make_key_set(const KeySetOptions& opt);

/// Each question has a gold table and a near-duplicate that differs in one
/// cell. The question names a cue word; the gold table holds the cue's
/// paired answer word, the duplicate holds a different one. Cue/answer pairs
/// come from a small shared vocabulary so the pairing can transfer.
struct NearDuplicateSetOptions {
    size_t num_questions = 300;
    size_t vocabulary = 10;
    size_t train = 180;
    size_t dev = 30;
    size_t test = 90;
    uint64_t seed = 11;
};

SyntheticSet
make_near_duplicate_set(const NearDuplicateSetOptions& opt);

}  // namespace tqa
