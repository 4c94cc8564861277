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

#include "tqa/index.h"

#include <fmt/format.h>

#include <algorithm>
#include <queue>
#include <unordered_set>

namespace tqa {

void
EmbeddingIndex::add(const std::string& id, std::span<const double> v) {
    if (v.size() != d_) {
        throw Error(fmt::format("embedding for {} has {} dims, index has {}", id, v.size(), d_));
    }
    if (!id_set_.insert(id).second) {
        throw Error(fmt::format("duplicate id {} in embedding index", id));
    }
    ids_.push_back(id);
    for (double x : v) {
        vectors_.push_back(static_cast<float>(x));
    }
}

EmbeddingIndex
encode_corpus(const EncoderParams& p, const Corpus& c, int threads) {
    std::vector<Embedding> rows(c.size());
    parallel_for(c.size(), threads, [&](size_t i) { rows[i] = encode_table(p, c[i]); });
    EmbeddingIndex idx(static_cast<size_t>(p.d));
    for (size_t i = 0; i < c.size(); ++i) {
        idx.add(c[i].table_id, rows[i]);
    }
    return idx;
}

std::vector<ScoredTable>
search(const EmbeddingIndex& idx, std::span<const double> h_q, size_t k) {
    if (k == 0) {
        throw Error("search: K must be >= 1");
    }
    if (h_q.size() != idx.dim()) {
        throw Error(fmt::format("search: query has {} dims, index has {}", h_q.size(), idx.dim()));
    }
    k = std::min(k, idx.size());
    // Min-heap on rank order: the top is the worst of the current best k.
    auto worse_on_top = [](const ScoredTable& a, const ScoredTable& b) { return ranks_before(a, b); };
    std::priority_queue<ScoredTable, std::vector<ScoredTable>, decltype(worse_on_top)> heap(worse_on_top);
    const size_t d = idx.dim();
    for (size_t i = 0; i < idx.size(); ++i) {
        auto v = idx.vector(i);
        double s = 0.0;
        for (size_t j = 0; j < d; ++j) {
            s += static_cast<double>(v[j]) * h_q[j];
        }
        ScoredTable cand{idx.ids()[i], s};
        if (heap.size() < k) {
            heap.push(std::move(cand));
        } else if (ranks_before(cand, heap.top())) {
            heap.pop();
            heap.push(std::move(cand));
        }
    }
    std::vector<ScoredTable> out;
    out.reserve(heap.size());
    while (!heap.empty()) {
        out.push_back(heap.top());
        heap.pop();
    }
    std::reverse(out.begin(), out.end());
    return out;
}

RetrievalRun
run_retrieval(const EmbeddingIndex& idx, const EncoderParams& p, std::span<const QAExample> questions,
              size_t k, int threads) {
    std::vector<RankedList> lists(questions.size());
    parallel_for(questions.size(), threads, [&](size_t i) {
        const auto h = encode_question(p, questions[i].question);
        lists[i] = {questions[i].question.question_id, idx.size() == 0 ? std::vector<ScoredTable>{}
                                                                       : search(idx, h, k)};
    });
    RetrievalRun run("dense");
    for (auto& l : lists) {
        run.add(std::move(l));
    }
    return run;
}

void
save_embeddings(const EmbeddingIndex& idx, const std::filesystem::path& path) {
    BinaryWriter w(path);
    w.put_bytes(kEmbeddingMagic);
    w.put<uint32_t>(kEmbeddingVersion);
    w.put<uint64_t>(idx.size());
    w.put<uint32_t>(static_cast<uint32_t>(idx.dim()));
    for (const auto& id : idx.ids_) {
        w.put_string(id);
    }
    for (float f : idx.vectors_) {
        w.put<float>(f);
    }
    w.close();
}

EmbeddingIndex
load_embeddings(const std::filesystem::path& path) {
    BinaryReader r(path);
    r.expect_magic(kEmbeddingMagic);
    if (auto v = r.get<uint32_t>(); v != kEmbeddingVersion) {
        r.fail(fmt::format("unsupported embedding file version {}", v));
    }
    const auto n = r.get<uint64_t>();
    const auto d = r.get<uint32_t>();
    if (d == 0) {
        r.fail("zero embedding dimension");
    }
    r.require(n * 4, "id block too short");
    EmbeddingIndex idx(d);
    for (uint64_t i = 0; i < n; ++i) {
        const auto at = r.offset();
        auto id = r.get_string();
        if (!idx.id_set_.insert(id).second) {
            r.fail_at(at, fmt::format("duplicate id {}", id));
        }
        idx.ids_.push_back(std::move(id));
    }
    r.require(n * d * sizeof(float), "float block too short");
    idx.vectors_.resize(n * d);
    for (auto& f : idx.vectors_) {
        f = r.get<float>();
    }
    if (!r.at_end()) {
        r.fail("trailing bytes");
    }
    return idx;
}

}  // namespace tqa
