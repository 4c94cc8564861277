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

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "tqa/core.h"
#include "tqa/run.h"

namespace tqa {

/// True iff some answer, tokenized, occurs as a contiguous token run inside
/// a single cell (header cells included). Throws on an empty answer list.
bool
contains_answer(const Table& t, std::span<const std::string> answers);

struct MinedTriple {
    std::string question_id;
    std::string gold_table_id;
    std::string hard_negative_table_id;

    bool
    operator==(const MinedTriple&) const = default;
};

struct MiningResult {
    std::vector<MinedTriple> triples;
    std::vector<std::string> missing_from_run;  // skipped questions
    size_t no_survivor = 0;                     // questions with every top-M table excluded
};

/// The first table in each question's ranking (up to depth) that is neither
/// gold nor answer-bearing. Questions without answers only skip the gold.
MiningResult
mine_hard_negatives(const RetrievalRun& run, std::span<const QAExample> examples, const Corpus& c, size_t depth,
                    int threads = 1);

/// TSV: question_id <TAB> hard_negative_table_id
void
save_negatives(const std::vector<MinedTriple>& triples, const std::filesystem::path& path);

/// question_id -> hard negative table id
std::vector<std::pair<std::string, std::string>>
load_negatives(const std::filesystem::path& path);

}  // namespace tqa
