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

#include "tqa/synthetic.h"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <numeric>
#include <set>

namespace tqa {

WordForge::WordForge(uint64_t seed) : rng_(mix_seed(seed, 0xf06e)) {
}

std::string
WordForge::next() {
    static constexpr std::string_view kOnsets[] = {"b", "d",  "f",  "g",  "k", "l",  "m",  "n",
                                                   "p", "r",  "s",  "t",  "v", "z",  "br", "dr",
                                                   "gl", "kr", "pl", "st", "tr", "zv", "sk", "vl"};
    static constexpr std::string_view kVowels[] = {"a", "e", "i", "o", "u", "ai", "ou", "ei"};
    for (;;) {
        std::string w;
        const size_t syllables = 3 + rng_.below(2);
        for (size_t s = 0; s < syllables; ++s) {
            w += kOnsets[rng_.below(std::size(kOnsets))];
            w += kVowels[rng_.below(std::size(kVowels))];
        }
        if (w.size() >= 6 && std::find(used_.begin(), used_.end(), w) == used_.end()) {
            used_.push_back(w);
            return w;
        }
    }
}

namespace {

void
split(std::vector<QAExample> all, const std::vector<std::vector<std::string>>& related, size_t train, size_t dev,
      size_t test, SyntheticSet& out) {
    if (train + dev + test > all.size()) {
        throw Error(fmt::format("split sizes {}+{}+{} exceed {} questions", train, dev, test, all.size()));
    }
    out.train.assign(all.begin(), all.begin() + long(train));
    out.dev.assign(all.begin() + long(train), all.begin() + long(train + dev));
    out.test.assign(all.begin() + long(train + dev), all.begin() + long(train + dev + test));
    std::set<std::string> dev_ids;
    for (size_t i = train; i < train + dev; ++i) {
        dev_ids.insert(related[i].begin(), related[i].end());
    }
    for (const auto& t : out.tables) {
        if (dev_ids.contains(t.table_id)) {
            out.dev_tables.add(t);
        }
    }
}

}  // namespace

SyntheticSet
make_key_set(const KeySetOptions& opt) {
    const size_t n = opt.num_questions;
    if (n == 0 || opt.num_tables < n) {
        throw Error("key set needs at least one question and one table per question");
    }
    const size_t extra = opt.num_tables - n;
    if (opt.distractors > 0 && extra == 0) {
        throw Error("key set needs distractor tables when distractors > 0");
    }
    WordForge forge(opt.seed);
    std::vector<std::array<std::string, 2>> keys(n);
    for (auto& k : keys) {
        k = {forge.next(), forge.next()};
    }
    static constexpr std::string_view kFields[] = {"mascot", "founder", "motto", "anthem"};
    Rng rng(mix_seed(opt.seed, 1));

    // Slot s of question q lands on distractor (7q + 13s) mod extra and
    // carries key word s mod 2. The slots of one question hit distinct
    // tables, so each distractor shares exactly one word with it.
    std::vector<std::vector<std::string>> distractor_words(extra);
    std::vector<std::vector<std::string>> related(n);
    for (size_t q = 0; q < n; ++q) {
        for (size_t s = 0; s < opt.distractors; ++s) {
            const size_t e = (q * 7 + s * 13) % extra;
            distractor_words[e].push_back(keys[q][s % 2]);
            related[q].push_back(fmt::format("kt{:04d}", n + e));
        }
    }

    SyntheticSet out;
    std::vector<QAExample> questions;
    auto make_rows = [&](std::vector<std::string>& values) {
        std::vector<std::vector<std::string>> rows;
        for (auto f : kFields) {
            values.push_back(forge.next());
            rows.push_back({std::string(f), values.back()});
        }
        return rows;
    };
    for (size_t q = 0; q < n; ++q) {
        Table t;
        t.table_id = fmt::format("kt{:04d}", q);
        t.page_title = fmt::format("{} {} club", keys[q][0], keys[q][1]);
        t.page_version = fmt::format("v{}", q);
        t.header = {"field", "value"};
        std::vector<std::string> values;
        t.rows = make_rows(values);
        const size_t f = rng.below(std::size(kFields));
        questions.push_back({{fmt::format("kq{:04d}", q),
                              fmt::format("what is the {} of {} {}", kFields[f], keys[q][0], keys[q][1])},
                             t.table_id,
                             {values[f]}});
        related[q].insert(related[q].begin(), t.table_id);
        out.tables.add(std::move(t));
    }
    for (size_t e = 0; e < extra; ++e) {
        Table t;
        t.table_id = fmt::format("kt{:04d}", n + e);
        auto words = distractor_words[e];
        if (words.empty()) {
            words.push_back(forge.next());
        }
        words.push_back("club");
        std::string title;
        for (const auto& w : words) {
            title += title.empty() ? w : " " + w;
        }
        t.page_title = title;
        t.page_version = fmt::format("v{}", n + e);
        t.header = {"field", "value"};
        std::vector<std::string> values;
        t.rows = make_rows(values);
        out.tables.add(std::move(t));
    }
    // Shuffle question order before splitting so splits are not positional.
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});
    rng.shuffle(order);
    std::vector<QAExample> shuffled;
    std::vector<std::vector<std::string>> shuffled_related;
    for (auto i : order) {
        shuffled.push_back(questions[i]);
        shuffled_related.push_back(related[i]);
    }
    split(std::move(shuffled), shuffled_related, opt.train, opt.dev, opt.test, out);
    return out;
}

SyntheticSet
make_near_duplicate_set(const NearDuplicateSetOptions& opt) {
    const size_t n = opt.num_questions;
    if (n == 0 || opt.vocabulary < 2) {
        throw Error("near-duplicate set needs questions and a vocabulary of at least 2 pairs");
    }
    WordForge forge(opt.seed);
    std::vector<std::string> cues(opt.vocabulary), answers(opt.vocabulary);
    for (size_t v = 0; v < opt.vocabulary; ++v) {
        cues[v] = forge.next();
        answers[v] = forge.next();
    }
    Rng rng(mix_seed(opt.seed, 1));
    SyntheticSet out;
    std::vector<QAExample> questions;
    std::vector<std::vector<std::string>> related;
    for (size_t q = 0; q < n; ++q) {
        const std::string k1 = forge.next();
        const std::string k2 = forge.next();
        const size_t a = rng.below(opt.vocabulary);
        size_t b = rng.below(opt.vocabulary - 1);
        b += b >= a ? 1 : 0;
        const std::string filler1 = forge.next();
        const std::string filler2 = forge.next();
        auto build = [&](const std::string& id, const std::string& pick, int version) {
            Table t;
            t.table_id = id;
            t.page_title = fmt::format("{} {} registry", k1, k2);
            t.page_version = fmt::format("v{}", version);
            t.header = {"entry", "value"};
            t.rows = {{"founded", filler1}, {"colour", pick}, {"patron", filler2}};
            return t;
        };
        auto gold = build(fmt::format("nt{:04d}a", q), answers[a], 1);
        auto dup = build(fmt::format("nt{:04d}b", q), answers[b], 2);
        questions.push_back({{fmt::format("nq{:04d}", q), fmt::format("which {} colour does {} {} list", cues[a], k1, k2)},
                             gold.table_id,
                             {answers[a]}});
        related.push_back({gold.table_id, dup.table_id});
        // Alternate insertion order so the duplicate is not always second.
        if (rng.below(2) == 0) {
            out.tables.add(std::move(gold));
            out.tables.add(std::move(dup));
        } else {
            out.tables.add(std::move(dup));
            out.tables.add(std::move(gold));
        }
    }
    split(std::move(questions), related, opt.train, opt.dev, opt.test, out);
    return out;
}

}  // namespace tqa
