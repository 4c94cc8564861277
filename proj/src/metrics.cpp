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

#include "tqa/metrics.h"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <map>
#include <sstream>

#include "tqa/textproc.h"

namespace tqa {

using ojson = nlohmann::ordered_json;

namespace {

const std::string&
mapped(const IdMap* m, const std::string& id) {
    if (m) {
        if (auto it = m->find(id); it != m->end()) {
            return it->second;
        }
    }
    return id;
}

}  // namespace

double
recall_at_k(const RetrievalRun& run, std::span<const QAExample> examples, size_t k, const IdMap* id_map,
            size_t* missing) {
    if (examples.empty()) {
        throw Error("recall@k is undefined on an empty example set");
    }
    size_t hits = 0;
    size_t absent = 0;
    for (const auto& ex : examples) {
        if (!ex.gold_table_id) {
            throw Error(fmt::format("question {} has no gold table", ex.question.question_id));
        }
        const auto& gold = mapped(id_map, *ex.gold_table_id);
        const auto* list = run.find(ex.question.question_id);
        if (!list) {
            ++absent;
            continue;
        }
        const size_t depth = std::min(k, list->ranked.size());
        for (size_t i = 0; i < depth; ++i) {
            if (mapped(id_map, list->ranked[i].table_id) == gold) {
                ++hits;
                break;
            }
        }
    }
    if (missing) {
        *missing = absent;
    }
    return static_cast<double>(hits) / static_cast<double>(examples.size());
}

double
mean_reciprocal_rank(const RetrievalRun& run, std::span<const QAExample> examples, size_t k,
                     const IdMap* id_map) {
    if (examples.empty()) {
        throw Error("MRR is undefined on an empty example set");
    }
    double total = 0.0;
    for (const auto& ex : examples) {
        if (!ex.gold_table_id) {
            throw Error(fmt::format("question {} has no gold table", ex.question.question_id));
        }
        const auto& gold = mapped(id_map, *ex.gold_table_id);
        const auto* list = run.find(ex.question.question_id);
        if (!list) {
            continue;
        }
        const size_t depth = std::min(k, list->ranked.size());
        for (size_t i = 0; i < depth; ++i) {
            if (mapped(id_map, list->ranked[i].table_id) == gold) {
                total += 1.0 / double(i + 1);
                break;
            }
        }
    }
    return total / static_cast<double>(examples.size());
}

std::string
squad_normalize(std::string_view s) {
    std::string text;
    for (const auto& ch : lowercase_utf8(s)) {
        if (!std::ispunct(static_cast<unsigned char>(ch)) || static_cast<unsigned char>(ch) >= 0x80) {
            text.push_back(ch);
        }
    }
    std::istringstream in(text);
    std::string word;
    std::string out;
    while (in >> word) {
        if (word == "a" || word == "an" || word == "the") {
            continue;
        }
        if (!out.empty()) {
            out.push_back(' ');
        }
        out += word;
    }
    return out;
}

namespace {

std::vector<std::string>
split_ws(const std::string& s) {
    std::istringstream in(s);
    std::vector<std::string> out;
    std::string w;
    while (in >> w) {
        out.push_back(w);
    }
    return out;
}

double
token_f1(const std::vector<std::string>& pred, const std::vector<std::string>& gold) {
    if (pred.empty() || gold.empty()) {
        return pred.empty() && gold.empty() ? 1.0 : 0.0;
    }
    std::map<std::string, int> counts;
    for (const auto& t : gold) {
        ++counts[t];
    }
    int same = 0;
    for (const auto& t : pred) {
        if (auto it = counts.find(t); it != counts.end() && it->second > 0) {
            --it->second;
            ++same;
        }
    }
    if (same == 0) {
        return 0.0;
    }
    const double precision = double(same) / double(pred.size());
    const double recall = double(same) / double(gold.size());
    return 2.0 * precision * recall / (precision + recall);
}

}  // namespace

EmF1
em_f1(std::string_view pred, std::span<const std::string> golds) {
    if (golds.empty()) {
        throw Error("em_f1 needs at least one gold answer");
    }
    const auto p = squad_normalize(pred);
    const auto ptoks = split_ws(p);
    EmF1 best;
    for (const auto& g : golds) {
        const auto n = squad_normalize(g);
        best.em = std::max(best.em, n == p ? 1 : 0);
        best.f1 = std::max(best.f1, token_f1(ptoks, split_ws(n)));
    }
    return best;
}

void
save_predictions(const std::vector<Prediction>& preds, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(fmt::format("cannot write {}", path.string()));
    }
    for (const auto& p : preds) {
        ojson j;
        j["question_id"] = p.question_id;
        j["table_id"] = p.table_id;
        j["answer"] = p.answer;
        j["score"] = p.score;
        ojson cands = ojson::array();
        for (const auto& c : p.candidate_answers) {
            cands.push_back({{"table_id", c.table_id}, {"answer", c.answer}, {"score", c.score}});
        }
        j["candidate_answers"] = std::move(cands);
        out << j.dump() << '\n';
    }
}

std::vector<Prediction>
load_predictions(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(fmt::format("cannot open {}", path.string()));
    }
    std::vector<Prediction> out;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        try {
            auto j = nlohmann::json::parse(line);
            Prediction p;
            p.question_id = j.at("question_id").get<std::string>();
            p.table_id = j.value("table_id", std::string());
            p.answer = j.value("answer", std::string());
            p.score = j.value("score", 0.0);
            if (j.contains("candidate_answers")) {
                for (const auto& c : j.at("candidate_answers")) {
                    p.candidate_answers.push_back({c.value("table_id", std::string()),
                                                   c.value("answer", std::string()), c.value("score", 0.0)});
                }
            }
            out.push_back(std::move(p));
        } catch (const std::exception& e) {
            throw Error(fmt::format("{}:{}: {}", path.string(), lineno, e.what()));
        }
    }
    return out;
}

double
EvalReport::at(std::string_view name) const {
    for (const auto& [k, v] : metrics) {
        if (k == name) {
            return v;
        }
    }
    throw Error(fmt::format("report has no metric {}", name));
}

std::string
EvalReport::to_json() const {
    ojson j;
    for (const auto& [k, v] : metrics) {
        j[k] = v;
    }
    j["num_questions"] = num_questions;
    j["num_skipped"] = num_skipped;
    j["num_missing"] = num_missing;
    return j.dump(2);
}

EvalReport
qa_report(std::span<const Prediction> predictions, std::span<const QAExample> examples) {
    std::unordered_map<std::string, const Prediction*> by_id;
    std::unordered_map<std::string, bool> known;
    for (const auto& ex : examples) {
        known[ex.question.question_id] = true;
    }
    EvalReport report;
    for (const auto& p : predictions) {
        if (!known.contains(p.question_id)) {
            ++report.num_skipped;
            continue;
        }
        by_id[p.question_id] = &p;
    }
    double em = 0, f1 = 0, oem = 0, of1 = 0;
    size_t n = 0;
    for (const auto& ex : examples) {
        if (ex.answers.empty()) {
            ++report.num_skipped;
            continue;
        }
        ++n;
        auto it = by_id.find(ex.question.question_id);
        if (it == by_id.end()) {
            ++report.num_missing;
            continue;
        }
        const auto& p = *it->second;
        const auto sel = em_f1(p.answer, ex.answers);
        EmF1 best = sel;
        for (const auto& c : p.candidate_answers) {
            const auto r = em_f1(c.answer, ex.answers);
            best.em = std::max(best.em, r.em);
            best.f1 = std::max(best.f1, r.f1);
        }
        em += sel.em;
        f1 += sel.f1;
        oem += best.em;
        of1 += best.f1;
    }
    if (n == 0) {
        throw Error("qa_report: no answerable examples");
    }
    const double dn = static_cast<double>(n);
    report.metrics = {{"em", em / dn}, {"f1", f1 / dn}, {"oracle_em", oem / dn}, {"oracle_f1", of1 / dn}};
    report.num_questions = n;
    return report;
}

EvalReport
retrieval_report(const RetrievalRun& run, std::span<const QAExample> examples, std::span<const size_t> ks,
                 const IdMap* id_map) {
    EvalReport report;
    report.num_questions = examples.size();
    for (size_t k : ks) {
        size_t missing = 0;
        report.metrics.emplace_back(fmt::format("recall@{}", k), recall_at_k(run, examples, k, id_map, &missing));
        report.num_missing = missing;
    }
    return report;
}

McNemarResult
mcnemar(std::span<const int> correct_a, std::span<const int> correct_b) {
    if (correct_a.size() != correct_b.size() || correct_a.empty()) {
        throw Error(fmt::format("mcnemar needs equal non-empty inputs ({} vs {})", correct_a.size(),
                                correct_b.size()));
    }
    McNemarResult r;
    for (size_t i = 0; i < correct_a.size(); ++i) {
        const bool a = correct_a[i] != 0;
        const bool b = correct_b[i] != 0;
        r.b += (a && !b) ? 1 : 0;
        r.c += (!a && b) ? 1 : 0;
    }
    const double disc = static_cast<double>(r.b + r.c);
    if (disc == 0) {
        return r;
    }
    const double diff = std::abs(static_cast<double>(r.b) - static_cast<double>(r.c)) - 1.0;
    r.statistic = std::max(0.0, diff) * std::max(0.0, diff) / disc;
    r.p_value = std::erfc(std::sqrt(r.statistic / 2.0));
    return r;
}

}  // namespace tqa
