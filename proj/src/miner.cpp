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

#include "tqa/miner.h"

#include <fmt/format.h>

#include <algorithm>
#include <fstream>
#include <optional>
#include <unordered_set>

#include "tqa/textproc.h"

namespace tqa {

namespace {

bool
contains_run(const std::vector<std::string>& hay, const std::vector<std::string>& needle) {
    if (needle.empty() || needle.size() > hay.size()) {
        return false;
    }
    return std::search(hay.begin(), hay.end(), needle.begin(), needle.end()) != hay.end();
}

}  // namespace

bool
contains_answer(const Table& t, std::span<const std::string> answers) {
    if (answers.empty()) {
        throw Error("contains_answer needs at least one answer");
    }
    std::vector<std::vector<std::string>> needles;
    for (const auto& a : answers) {
        auto toks = tokenize_words(a);
        if (!toks.empty()) {
            needles.push_back(std::move(toks));
        }
    }
    auto check = [&](const std::string& cell) {
        const auto toks = tokenize_words(cell);
        return std::any_of(needles.begin(), needles.end(), [&](const auto& n) { return contains_run(toks, n); });
    };
    for (const auto& h : t.header) {
        if (check(h)) {
            return true;
        }
    }
    for (const auto& row : t.rows) {
        for (const auto& cell : row) {
            if (check(cell)) {
                return true;
            }
        }
    }
    return false;
}

MiningResult
mine_hard_negatives(const RetrievalRun& run, std::span<const QAExample> examples, const Corpus& c, size_t depth,
                    int threads) {
    if (depth < 1) {
        throw Error("mining depth must be >= 1");
    }
    enum class Outcome { kFound, kMissing, kNone };
    std::vector<std::optional<MinedTriple>> found(examples.size());
    std::vector<Outcome> outcome(examples.size(), Outcome::kNone);
    parallel_for(examples.size(), threads, [&](size_t i) {
        const auto& ex = examples[i];
        if (!ex.gold_table_id) {
            throw Error(fmt::format("question {} has no gold table", ex.question.question_id));
        }
        const auto* list = run.find(ex.question.question_id);
        if (list == nullptr) {
            outcome[i] = Outcome::kMissing;
            return;
        }
        const size_t n = std::min(depth, list->ranked.size());
        for (size_t r = 0; r < n; ++r) {
            const auto& id = list->ranked[r].table_id;
            if (id == *ex.gold_table_id) {
                continue;
            }
            const Table* t = c.find(id);
            if (t == nullptr) {
                throw Error(fmt::format("run names table {} which is not in the corpus", id));
            }
            if (!ex.answers.empty() && contains_answer(*t, ex.answers)) {
                continue;
            }
            found[i] = MinedTriple{ex.question.question_id, *ex.gold_table_id, id};
            outcome[i] = Outcome::kFound;
            return;
        }
    });
    MiningResult res;
    for (size_t i = 0; i < examples.size(); ++i) {
        switch (outcome[i]) {
            case Outcome::kFound:
                res.triples.push_back(std::move(*found[i]));
                break;
            case Outcome::kMissing:
                res.missing_from_run.push_back(examples[i].question.question_id);
                break;
            case Outcome::kNone:
                ++res.no_survivor;
                break;
        }
    }
    return res;
}

void
save_negatives(const std::vector<MinedTriple>& triples, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(fmt::format("cannot write {}", path.string()));
    }
    for (const auto& t : triples) {
        out << t.question_id << '\t' << t.hard_negative_table_id << '\n';
    }
}

std::vector<std::pair<std::string, std::string>>
load_negatives(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(fmt::format("cannot open {}", path.string()));
    }
    std::vector<std::pair<std::string, std::string>> out;
    std::unordered_set<std::string> seen;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        const auto tab = line.find('\t');
        if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos) {
            throw Error(fmt::format("{}:{}: expected question_id<TAB>table_id", path.string(), lineno));
        }
        auto qid = line.substr(0, tab);
        if (!seen.insert(qid).second) {
            throw Error(fmt::format("{}:{}: duplicate question {}", path.string(), lineno, qid));
        }
        out.emplace_back(std::move(qid), line.substr(tab + 1));
    }
    return out;
}

}  // namespace tqa
