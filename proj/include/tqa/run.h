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
#include <string>
#include <unordered_map>
#include <vector>

namespace tqa {

struct ScoredTable {
    std::string table_id;
    double score;

    bool
    operator==(const ScoredTable&) const = default;
};

/// Descending score, ties by ascending table_id.
inline bool
ranks_before(const ScoredTable& a, const ScoredTable& b) {
    if (a.score != b.score) {
        return a.score > b.score;
    }
    return a.table_id < b.table_id;
}

struct RankedList {
    std::string question_id;
    std::vector<ScoredTable> ranked;  // rank i+1 at index i

    bool
    operator==(const RankedList&) const = default;
};

/// Ranked tables per question, in question order. Tag records the source
/// retriever (bm25, dense or file).
class RetrievalRun {
public:
    RetrievalRun() = default;
    explicit RetrievalRun(std::string tag) : tag_(std::move(tag)) {
    }

    const std::string&
    tag() const {
        return tag_;
    }

    /// Throws if the question already has a list or scores increase.
    void
    add(RankedList list);

    const RankedList*
    find(const std::string& question_id) const;

    const std::vector<RankedList>&
    lists() const {
        return lists_;
    }

    size_t
    size() const {
        return lists_.size();
    }

    /// Total number of (question, table) rows.
    size_t
    row_count() const;

    bool
    operator==(const RetrievalRun& o) const {
        return tag_ == o.tag_ && lists_ == o.lists_;
    }

private:
    std::string tag_ = "file";
    std::vector<RankedList> lists_;
    std::unordered_map<std::string, size_t> by_question_;
};

/// TSV: question_id, table_id, rank, score, tag. Scores are written with 17
/// significant digits so they read back bit-exact.
void
save_run(const RetrievalRun& run, const std::filesystem::path& path);

/// Validates contiguous ranks from 1 and non-increasing scores.
RetrievalRun
load_run(const std::filesystem::path& path);

}  // namespace tqa
