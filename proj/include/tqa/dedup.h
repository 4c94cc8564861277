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
#include <set>
#include <string>
#include <vector>

#include "tqa/core.h"
#include "tqa/textproc.h"

namespace tqa {

struct DedupCluster {
    std::string representative_id;
    std::set<std::string> member_ids;

    bool
    operator==(const DedupCluster&) const = default;
};

/// One accepted merge: the pair whose similarity linked two clusters.
struct MergeRecord {
    std::string a;
    std::string b;
    double similarity;
};

/// Cosine of two l2-normalized vectors; 0 when either is empty.
double
pairwise_cosine(const SparseVector& u, const SparseVector& v);

/// Same-page merge rule: similarity strictly above threshold, different page
/// versions, row counts within 2, equal column counts.
bool
merge_eligible(const Table& a, const Table& b, double sim, double threshold = kReferenceDedupThreshold);

/// Tokens of the table content (header and cells) used for similarity.
std::vector<std::string>
content_tokens(const Table& t);

/// Single-link clustering of the tables of one page. Pairs are visited by
/// decreasing similarity, ties by (smaller id, larger id). Clusters come
/// back sorted by representative (the smallest member id).
std::vector<DedupCluster>
cluster_page(std::span<const Table> tables, double threshold = kReferenceDedupThreshold,
             std::vector<MergeRecord>* merge_log = nullptr, Vocabulary* vocab = nullptr);

struct DedupResult {
    Corpus corpus;
    /// old table id -> representative id, in input corpus order.
    std::vector<std::pair<std::string, std::string>> mapping;
    std::vector<DedupCluster> clusters;
    std::vector<MergeRecord> merges;
};

/// Clusters each page_title group and keeps only representatives.
DedupResult
dedup_corpus(const Corpus& c, double threshold = kReferenceDedupThreshold);

void
save_id_map(const std::vector<std::pair<std::string, std::string>>& mapping,
            const std::filesystem::path& path);

std::unordered_map<std::string, std::string>
load_id_map(const std::filesystem::path& path);

}  // namespace tqa
