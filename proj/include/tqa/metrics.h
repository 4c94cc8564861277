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
#include <unordered_map>
#include <utility>
#include <vector>

#include "tqa/core.h"
#include "tqa/run.h"

namespace tqa {

using IdMap = std::unordered_map<std::string, std::string>;

/// Fraction of examples whose gold table is within the first k ranks.
/// Questions absent from the run count as misses (reported via `missing`).
/// Throws on an empty example set or an example without a gold table.
double
recall_at_k(const RetrievalRun& run, std::span<const QAExample> examples, size_t k,
            const IdMap* id_map = nullptr, size_t* missing = nullptr);

/// Mean over examples of 1/rank of the gold table within the first k ranks
/// (0 when absent). Same conventions as recall_at_k.
double
mean_reciprocal_rank(const RetrievalRun& run, std::span<const QAExample> examples, size_t k,
                     const IdMap* id_map = nullptr);

/// Lowercase, drop ASCII punctuation, drop the articles a/an/the, collapse whitespace.
std::string
squad_normalize(std::string_view s);

struct EmF1 {
    int em = 0;
    double f1 = 0.0;
};

/// Max over golds of exact match and token-multiset F1 on normalized text.
EmF1
em_f1(std::string_view pred, std::span<const std::string> golds);

struct CandidateAnswer {
    std::string table_id;
    std::string answer;
    double score = 0.0;

    bool
    operator==(const CandidateAnswer&) const = default;
};

struct Prediction {
    std::string question_id;
    std::string table_id;  // empty when no candidate yielded a span
    std::string answer;
    double score = 0.0;
    std::vector<CandidateAnswer> candidate_answers;

    bool
    operator==(const Prediction&) const = default;
};

void
save_predictions(const std::vector<Prediction>& preds, const std::filesystem::path& path);

std::vector<Prediction>
load_predictions(const std::filesystem::path& path);

struct EvalReport {
    std::vector<std::pair<std::string, double>> metrics;  // in report order
    size_t num_questions = 0;
    size_t num_skipped = 0;
    size_t num_missing = 0;

    double
    at(std::string_view name) const;

    std::string
    to_json() const;
};

/// EM/F1 over the selected answers and oracle EM/F1 over the best of each
/// question's candidate answers (the selected answer included).
EvalReport
qa_report(std::span<const Prediction> predictions, std::span<const QAExample> examples);

EvalReport
retrieval_report(const RetrievalRun& run, std::span<const QAExample> examples, std::span<const size_t> ks,
                 const IdMap* id_map = nullptr);

struct McNemarResult {
    double statistic = 0.0;
    double p_value = 1.0;
    size_t b = 0;  // A correct, B wrong
    size_t c = 0;  // A wrong, B correct
};

/// Continuity-corrected McNemar test, chi-square(1) tail via erfc.
McNemarResult
mcnemar(std::span<const int> correct_a, std::span<const int> correct_b);

}  // namespace tqa
