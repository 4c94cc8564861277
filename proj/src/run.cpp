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

#include "tqa/run.h"

#include <fmt/format.h>

#include <fstream>
#include <sstream>

#include "tqa/util.h"

namespace tqa {

void
RetrievalRun::add(RankedList list) {
    for (size_t i = 1; i < list.ranked.size(); ++i) {
        if (list.ranked[i].score > list.ranked[i - 1].score) {
            throw Error(fmt::format("run for question {} has increasing scores at rank {}",
                                    list.question_id, i + 1));
        }
    }
    auto [it, inserted] = by_question_.emplace(list.question_id, lists_.size());
    if (!inserted) {
        throw Error(fmt::format("run already holds question {}", list.question_id));
    }
    lists_.push_back(std::move(list));
}

const RankedList*
RetrievalRun::find(const std::string& question_id) const {
    auto it = by_question_.find(question_id);
    return it == by_question_.end() ? nullptr : &lists_[it->second];
}

size_t
RetrievalRun::row_count() const {
    size_t n = 0;
    for (const auto& l : lists_) {
        n += l.ranked.size();
    }
    return n;
}

void
save_run(const RetrievalRun& run, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(fmt::format("cannot write {}", path.string()));
    }
    for (const auto& l : run.lists()) {
        for (size_t i = 0; i < l.ranked.size(); ++i) {
            out << fmt::format("{}\t{}\t{}\t{:.17g}\t{}\n", l.question_id, l.ranked[i].table_id, i + 1,
                               l.ranked[i].score, run.tag());
        }
    }
    if (!out) {
        throw Error(fmt::format("write failed for {}", path.string()));
    }
}

RetrievalRun
load_run(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(fmt::format("cannot open {}", path.string()));
    }
    std::string tag;
    std::vector<RankedList> lists;
    std::unordered_map<std::string, size_t> index;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, '\t')) {
            f.push_back(field);
        }
        auto bad = [&](const std::string& what) {
            return Error(fmt::format("{}:{}: {}", path.string(), lineno, what));
        };
        if (f.size() != 5) {
            throw bad("expected 5 tab-separated fields");
        }
        size_t rank = 0;
        double score = 0.0;
        try {
            rank = std::stoul(f[2]);
            score = std::stod(f[3]);
        } catch (const std::exception&) {
            throw bad("bad rank or score");
        }
        if (tag.empty()) {
            tag = f[4];
        }
        auto [it, inserted] = index.emplace(f[0], lists.size());
        if (inserted) {
            lists.push_back({f[0], {}});
        }
        auto& list = lists[it->second];
        if (rank != list.ranked.size() + 1) {
            throw bad(fmt::format("rank {} out of sequence for question {}", rank, f[0]));
        }
        list.ranked.push_back({f[1], score});
    }
    RetrievalRun run(tag.empty() ? "file" : tag);
    for (auto& l : lists) {
        run.add(std::move(l));
    }
    return run;
}

}  // namespace tqa
