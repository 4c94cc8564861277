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
#include <unordered_set>
#include <vector>

#include "tqa/core.h"
#include "tqa/encoder.h"
#include "tqa/run.h"

namespace tqa {

/// Table embeddings stored as f32 rows; scoring accumulates in f64.
class EmbeddingIndex {
public:
    EmbeddingIndex() = default;
    explicit EmbeddingIndex(size_t d) : d_(d) {
    }

    size_t
    dim() const {
        return d_;
    }

    size_t
    size() const {
        return ids_.size();
    }

    const std::vector<std::string>&
    ids() const {
        return ids_;
    }

    std::span<const float>
    vector(size_t i) const {
        return {vectors_.data() + i * d_, d_};
    }

    /// Throws on duplicate id or dimension mismatch.
    void
    add(const std::string& id, std::span<const double> v);

    bool
    operator==(const EmbeddingIndex& o) const {
        return d_ == o.d_ && ids_ == o.ids_ && vectors_ == o.vectors_;
    }

    friend void
    save_embeddings(const EmbeddingIndex& idx, const std::filesystem::path& path);

    friend EmbeddingIndex
    load_embeddings(const std::filesystem::path& path);

private:
    size_t d_ = 0;
    std::vector<std::string> ids_;
    std::unordered_set<std::string> id_set_;
    std::vector<float> vectors_;
};

/// One row per table in corpus order.
EmbeddingIndex
encode_corpus(const EncoderParams& p, const Corpus& c, int threads = 1);

/// Exact top-K by inner product (heap selection over a full scan).
/// K is clamped to the index size; ties go to the smaller table_id.
std::vector<ScoredTable>
search(const EmbeddingIndex& idx, std::span<const double> h_q, size_t k);

RetrievalRun
run_retrieval(const EmbeddingIndex& idx, const EncoderParams& p, std::span<const QAExample> questions,
              size_t k = kReferenceTopK, int threads = 1);

inline constexpr std::string_view kEmbeddingMagic = "TQEMBIDX";
inline constexpr uint32_t kEmbeddingVersion = 1;

void
save_embeddings(const EmbeddingIndex& idx, const std::filesystem::path& path);

EmbeddingIndex
load_embeddings(const std::filesystem::path& path);

}  // namespace tqa
