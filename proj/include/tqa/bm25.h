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
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "tqa/core.h"
#include "tqa/run.h"
#include "tqa/textproc.h"

namespace tqa {

struct Posting {
    uint32_t doc;
    uint32_t tf;

    bool
    operator==(const Posting&) const = default;
};

/// Okapi BM25 over flattened tables where page-title and header tokens are
/// counted `boost` times.
class InvertedIndex {
public:
    size_t
    doc_count() const {
        return table_ids_.size();
    }

    const std::vector<std::string>&
    table_ids() const {
        return table_ids_;
    }

    const std::vector<uint64_t>&
    doc_lengths() const {
        return doc_lengths_;
    }

    double
    avg_doc_length() const {
        return avg_doc_length_;
    }

    double
    k1() const {
        return k1_;
    }

    double
    b() const {
        return b_;
    }

    int
    boost() const {
        return boost_;
    }

    /// Postings of a term sorted by doc ordinal; empty for unknown terms.
    std::span<const Posting>
    postings(const std::string& term) const;

    uint32_t
    term_frequency(const std::string& term, size_t doc) const;

    /// ln(1 + (N - df + 0.5) / (df + 0.5)); never negative.
    double
    idf(size_t df) const;

    bool
    operator==(const InvertedIndex&) const = default;

    friend InvertedIndex
    build_index(const Corpus& c, int boost, double k1, double b);

    friend void
    save_bm25_index(const InvertedIndex& idx, const std::filesystem::path& path);

    friend InvertedIndex
    load_bm25_index(const std::filesystem::path& path);

private:
    std::vector<std::string> table_ids_;
    std::unordered_map<std::string, uint32_t> term_ids_;
    std::vector<std::string> terms_;
    std::vector<std::vector<Posting>> postings_;
    std::vector<uint64_t> doc_lengths_;
    double avg_doc_length_ = 0.0;
    double k1_ = 1.2;
    double b_ = 0.75;
    int boost_ = kReferenceBm25Boost;
};

InvertedIndex
build_index(const Corpus& c, int boost = kReferenceBm25Boost, double k1 = 1.2, double b = 0.75);

/// Sum over distinct query tokens of idf * saturated tf.
double
bm25_score(const InvertedIndex& idx, const TokenSeq& q, size_t table_ordinal);

std::vector<ScoredTable>
bm25_topk(const InvertedIndex& idx, const Question& q, size_t k);

void
save_bm25_index(const InvertedIndex& idx, const std::filesystem::path& path);

InvertedIndex
load_bm25_index(const std::filesystem::path& path);

inline constexpr std::string_view kBm25Magic = "TQBM25IX";

}  // namespace tqa
