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

#include "tqa/dedup.h"

#include <fmt/format.h>

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>

namespace tqa {

double
pairwise_cosine(const SparseVector& u, const SparseVector& v) {
    if (u.empty() || v.empty()) {
        return 0.0;
    }
    return dot(u, v);
}

bool
merge_eligible(const Table& a, const Table& b, double sim, double threshold) {
    const auto ra = static_cast<long>(a.num_rows());
    const auto rb = static_cast<long>(b.num_rows());
    return sim > threshold && a.page_version != b.page_version && std::abs(ra - rb) <= 2 &&
           a.num_columns() == b.num_columns();
}

std::vector<std::string>
content_tokens(const Table& t) {
    std::vector<std::string> out;
    for (const auto& h : t.header) {
        for (auto& tok : tokenize_words(h)) {
            out.push_back(std::move(tok));
        }
    }
    for (const auto& row : t.rows) {
        for (const auto& cell : row) {
            for (auto& tok : tokenize_words(cell)) {
                out.push_back(std::move(tok));
            }
        }
    }
    return out;
}

namespace {

class DisjointSets {
public:
    explicit DisjointSets(size_t n) : parent_(n) {
        std::iota(parent_.begin(), parent_.end(), size_t{0});
    }

    size_t
    find(size_t x) {
        while (parent_[x] != x) {
            parent_[x] = parent_[parent_[x]];
            x = parent_[x];
        }
        return x;
    }

    bool
    unite(size_t a, size_t b) {
        a = find(a);
        b = find(b);
        if (a == b) {
            return false;
        }
        parent_[std::max(a, b)] = std::min(a, b);
        return true;
    }

private:
    std::vector<size_t> parent_;
};

struct Candidate {
    double sim;
    size_t i;  // index of the lexicographically smaller id
    size_t j;
};

}  // namespace

std::vector<DedupCluster>
cluster_page(std::span<const Table> tables, double threshold, std::vector<MergeRecord>* merge_log,
             Vocabulary* vocab) {
    Vocabulary local;
    Vocabulary& v = vocab ? *vocab : local;
    std::vector<SparseVector> vectors;
    vectors.reserve(tables.size());
    for (const auto& t : tables) {
        auto toks = content_tokens(t);
        vectors.push_back(unigram_vector(toks, v));
    }

    std::vector<Candidate> pairs;
    for (size_t i = 0; i < tables.size(); ++i) {
        for (size_t j = i + 1; j < tables.size(); ++j) {
            size_t a = i;
            size_t b = j;
            if (tables[b].table_id < tables[a].table_id) {
                std::swap(a, b);
            }
            pairs.push_back({pairwise_cosine(vectors[i], vectors[j]), a, b});
        }
    }
    std::sort(pairs.begin(), pairs.end(), [&](const Candidate& x, const Candidate& y) {
        if (x.sim != y.sim) {
            return x.sim > y.sim;
        }
        if (tables[x.i].table_id != tables[y.i].table_id) {
            return tables[x.i].table_id < tables[y.i].table_id;
        }
        return tables[x.j].table_id < tables[y.j].table_id;
    });

    DisjointSets sets(tables.size());
    for (const auto& p : pairs) {
        if (p.sim <= threshold) {
            break;  // remaining pairs cannot pass the similarity condition
        }
        if (!merge_eligible(tables[p.i], tables[p.j], p.sim, threshold)) {
            continue;
        }
        if (sets.unite(p.i, p.j) && merge_log) {
            merge_log->push_back({tables[p.i].table_id, tables[p.j].table_id, p.sim});
        }
    }

    std::map<size_t, DedupCluster> by_root;
    for (size_t i = 0; i < tables.size(); ++i) {
        by_root[sets.find(i)].member_ids.insert(tables[i].table_id);
    }
    std::vector<DedupCluster> out;
    for (auto& [root, cluster] : by_root) {
        cluster.representative_id = *cluster.member_ids.begin();
        out.push_back(std::move(cluster));
    }
    std::sort(out.begin(), out.end(), [](const DedupCluster& a, const DedupCluster& b) {
        return a.representative_id < b.representative_id;
    });
    return out;
}

DedupResult
dedup_corpus(const Corpus& c, double threshold) {
    std::vector<std::string> page_order;
    std::unordered_map<std::string, std::vector<Table>> pages;
    for (const auto& t : c) {
        auto [it, inserted] = pages.try_emplace(t.page_title);
        if (inserted) {
            page_order.push_back(t.page_title);
        }
        it->second.push_back(t);
    }

    DedupResult result;
    Vocabulary vocab;
    std::unordered_map<std::string, std::string> rep_of;
    for (const auto& page : page_order) {
        auto clusters = cluster_page(pages[page], threshold, &result.merges, &vocab);
        for (auto& cl : clusters) {
            for (const auto& id : cl.member_ids) {
                rep_of[id] = cl.representative_id;
            }
            result.clusters.push_back(std::move(cl));
        }
    }
    for (const auto& t : c) {
        const auto& rep = rep_of.at(t.table_id);
        result.mapping.emplace_back(t.table_id, rep);
        if (rep == t.table_id) {
            result.corpus.add(t);
        }
    }
    return result;
}

void
save_id_map(const std::vector<std::pair<std::string, std::string>>& mapping,
            const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(fmt::format("cannot write {}", path.string()));
    }
    for (const auto& [from, to] : mapping) {
        out << from << '\t' << to << '\n';
    }
}

std::unordered_map<std::string, std::string>
load_id_map(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(fmt::format("cannot open {}", path.string()));
    }
    std::unordered_map<std::string, std::string> out;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        auto tab = line.find('\t');
        if (tab == std::string::npos) {
            throw Error(fmt::format("{}:{}: expected old_id<TAB>representative_id", path.string(), lineno));
        }
        out[line.substr(0, tab)] = line.substr(tab + 1);
    }
    return out;
}

}  // namespace tqa
