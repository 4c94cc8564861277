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

#include "tqa/bm25.h"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <set>

namespace tqa {

namespace {
constexpr uint32_t kBm25Version = 1;
}

std::span<const Posting>
InvertedIndex::postings(const std::string& term) const {
    auto it = term_ids_.find(term);
    if (it == term_ids_.end()) {
        return {};
    }
    return postings_[it->second];
}

uint32_t
InvertedIndex::term_frequency(const std::string& term, size_t doc) const {
    auto list = postings(term);
    auto it = std::lower_bound(list.begin(), list.end(), doc,
                               [](const Posting& p, size_t d) { return p.doc < d; });
    return (it != list.end() && it->doc == doc) ? it->tf : 0;
}

double
InvertedIndex::idf(size_t df) const {
    const double n = static_cast<double>(doc_count());
    const double d = static_cast<double>(df);
    return std::log(1.0 + (n - d + 0.5) / (d + 0.5));
}

InvertedIndex
build_index(const Corpus& c, int boost, double k1, double b) {
    if (boost < 1) {
        throw Error("bm25 boost must be >= 1");
    }
    InvertedIndex idx;
    idx.k1_ = k1;
    idx.b_ = b;
    idx.boost_ = boost;
    uint64_t total = 0;
    for (size_t doc = 0; doc < c.size(); ++doc) {
        const auto& t = c[doc];
        idx.table_ids_.push_back(t.table_id);
        std::unordered_map<uint32_t, uint32_t> tf;
        uint64_t len = 0;
        for (const auto& tok : flatten_table(t, FlattenMode::kFull)) {
            const bool boosted = tok.segment == Segment::kTitle || tok.segment == Segment::kHeader;
            const uint32_t count = boosted ? static_cast<uint32_t>(boost) : 1;
            auto [it, inserted] = idx.term_ids_.emplace(tok.token, static_cast<uint32_t>(idx.terms_.size()));
            if (inserted) {
                idx.terms_.push_back(tok.token);
                idx.postings_.emplace_back();
            }
            tf[it->second] += count;
            len += count;
        }
        for (const auto& [term, count] : tf) {
            idx.postings_[term].push_back({static_cast<uint32_t>(doc), count});
        }
        idx.doc_lengths_.push_back(len);
        total += len;
    }
    idx.avg_doc_length_ = c.empty() ? 0.0 : static_cast<double>(total) / static_cast<double>(c.size());
    return idx;
}

namespace {

double
term_weight(const InvertedIndex& idx, double idf, uint32_t tf, size_t doc) {
    const double dl = static_cast<double>(idx.doc_lengths()[doc]);
    const double avg = idx.avg_doc_length() > 0 ? idx.avg_doc_length() : 1.0;
    const double f = static_cast<double>(tf);
    return idf * f * (idx.k1() + 1.0) / (f + idx.k1() * (1.0 - idx.b() + idx.b() * dl / avg));
}

std::vector<std::string>
distinct(const std::vector<std::string>& tokens) {
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (const auto& t : tokens) {
        if (seen.insert(t).second) {
            out.push_back(t);
        }
    }
    return out;
}

}  // namespace

double
bm25_score(const InvertedIndex& idx, const TokenSeq& q, size_t table_ordinal) {
    if (table_ordinal >= idx.doc_count()) {
        throw Error(fmt::format("bm25_score: table ordinal {} out of range", table_ordinal));
    }
    double score = 0.0;
    for (const auto& term : distinct(q.tokens)) {
        const uint32_t tf = idx.term_frequency(term, table_ordinal);
        if (tf == 0) {
            continue;
        }
        score += term_weight(idx, idx.idf(idx.postings(term).size()), tf, table_ordinal);
    }
    return score;
}

std::vector<ScoredTable>
bm25_topk(const InvertedIndex& idx, const Question& q, size_t k) {
    if (k == 0) {
        throw Error("bm25_topk: K must be >= 1");
    }
    std::vector<double> scores(idx.doc_count(), 0.0);
    // Term-at-a-time accumulation visits terms in first-occurrence order so
    // the floating-point sum matches bm25_score exactly.
    for (const auto& term : distinct(tokenize(q.text).tokens)) {
        auto list = idx.postings(term);
        if (list.empty()) {
            continue;
        }
        const double w = idx.idf(list.size());
        for (const auto& p : list) {
            scores[p.doc] += term_weight(idx, w, p.tf, p.doc);
        }
    }
    std::vector<ScoredTable> all;
    all.reserve(scores.size());
    for (size_t d = 0; d < scores.size(); ++d) {
        all.push_back({idx.table_ids()[d], scores[d]});
    }
    const size_t keep = std::min(k, all.size());
    std::partial_sort(all.begin(), all.begin() + static_cast<long>(keep), all.end(), ranks_before);
    all.resize(keep);
    return all;
}

void
save_bm25_index(const InvertedIndex& idx, const std::filesystem::path& path) {
    BinaryWriter w(path);
    w.put_bytes(kBm25Magic);
    w.put<uint32_t>(kBm25Version);
    w.put<double>(idx.k1_);
    w.put<double>(idx.b_);
    w.put<uint32_t>(static_cast<uint32_t>(idx.boost_));
    w.put<uint64_t>(idx.table_ids_.size());
    for (const auto& id : idx.table_ids_) {
        w.put_string(id);
    }
    for (auto len : idx.doc_lengths_) {
        w.put<uint64_t>(len);
    }
    w.put<uint64_t>(idx.terms_.size());
    for (size_t t = 0; t < idx.terms_.size(); ++t) {
        w.put_string(idx.terms_[t]);
        w.put<uint32_t>(static_cast<uint32_t>(idx.postings_[t].size()));
        for (const auto& p : idx.postings_[t]) {
            w.put<uint32_t>(p.doc);
            w.put<uint32_t>(p.tf);
        }
    }
    w.close();
}

InvertedIndex
load_bm25_index(const std::filesystem::path& path) {
    BinaryReader r(path);
    r.expect_magic(kBm25Magic);
    if (auto v = r.get<uint32_t>(); v != kBm25Version) {
        r.fail(fmt::format("unsupported bm25 index version {}", v));
    }
    InvertedIndex idx;
    idx.k1_ = r.get<double>();
    idx.b_ = r.get<double>();
    idx.boost_ = static_cast<int>(r.get<uint32_t>());
    const auto n = r.get<uint64_t>();
    r.require(n * 4, "table id block too short");
    uint64_t total = 0;
    for (uint64_t i = 0; i < n; ++i) {
        idx.table_ids_.push_back(r.get_string());
    }
    for (uint64_t i = 0; i < n; ++i) {
        idx.doc_lengths_.push_back(r.get<uint64_t>());
        total += idx.doc_lengths_.back();
    }
    const auto terms = r.get<uint64_t>();
    for (uint64_t t = 0; t < terms; ++t) {
        auto term = r.get_string();
        const auto count = r.get<uint32_t>();
        std::vector<Posting> list;
        list.reserve(count);
        for (uint32_t i = 0; i < count; ++i) {
            Posting p{r.get<uint32_t>(), r.get<uint32_t>()};
            if (p.doc >= n || (!list.empty() && p.doc <= list.back().doc)) {
                r.fail("posting list out of order");
            }
            list.push_back(p);
        }
        idx.term_ids_.emplace(term, static_cast<uint32_t>(idx.terms_.size()));
        idx.terms_.push_back(std::move(term));
        idx.postings_.push_back(std::move(list));
    }
    if (!r.at_end()) {
        r.fail("trailing bytes");
    }
    idx.avg_doc_length_ = n == 0 ? 0.0 : static_cast<double>(total) / static_cast<double>(n);
    return idx;
}

}  // namespace tqa
