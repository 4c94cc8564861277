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
#include <vector>

#include "tqa/core.h"
#include "tqa/metrics.h"
#include "tqa/params.h"
#include "tqa/run.h"
#include "tqa/textproc.h"

namespace tqa {

/// Reader parameters. Token vectors are sums of hashed feature embeddings
/// (token, token+segment, token+column). Everything else lives in one flat
/// block `dense`, laid out as
///   span MLP:         w1 (hidden x 2r, row-major), b1 (hidden), w2 (hidden), b2
///   candidate scorer: wc (r), bc
struct ReaderParams {
    int r = 64;
    int hidden = 64;
    uint32_t feature_dims = kDefaultFeatureDims;
    bool include_header = true;
    int max_answer_len = kReferenceMaxAnswerLen;
    LazyMatrix embeddings;
    std::vector<double> dense;

    size_t
    w1_offset() const {
        return 0;
    }
    size_t
    b1_offset() const {
        return size_t(hidden) * 2 * size_t(r);
    }
    size_t
    w2_offset() const {
        return b1_offset() + size_t(hidden);
    }
    size_t
    b2_offset() const {
        return w2_offset() + size_t(hidden);
    }
    size_t
    wc_offset() const {
        return b2_offset() + 1;
    }
    size_t
    bc_offset() const {
        return wc_offset() + size_t(r);
    }
    size_t
    dense_size() const {
        return bc_offset() + 1;
    }

    bool
    operator==(const ReaderParams&) const = default;
};

struct ReaderOptions {
    int r = 64;
    int hidden = 64;
    uint32_t feature_dims = kDefaultFeatureDims;
    bool include_header = true;
    int max_answer_len = kReferenceMaxAnswerLen;
    uint64_t seed = 42;
    /// Embedding init half-width; negative means 1/sqrt(r). Zero gives all-zero params.
    double init_scale = -1.0;

    static ReaderOptions
    from_config(const Config& cfg);
};

ReaderParams
make_reader(const ReaderOptions& opt);

/// The smooth rectifier used between the span MLP's layers: log(1 + e^x).
double
softplus(double x);

struct SpanCandidate {
    int row_idx = 0;  // 0 = header, r + 1 = data row r
    int col_idx = 0;  // 1-based column
    int token_start = 0;
    int token_end = 0;  // inclusive
    std::string text;

    bool
    operator==(const SpanCandidate&) const = default;
};

/// Every within-cell token span of at most max_len tokens, ordered by
/// (row, col, start, end). Header cells come first when included.
std::vector<SpanCandidate>
enumerate_spans(const Table& t, int max_len, bool include_header = true);

/// Per-token representations of one table under one question.
struct TableEncoding {
    std::vector<StructuredToken> tokens;       // all table tokens (title, metadata, header, cells)
    std::vector<std::vector<uint32_t>> feats;  // hashed feature ids per token
    std::vector<std::vector<double>> reps;     // r-vectors, question term included
    std::vector<uint32_t> question_feats;      // question token ids, one per question token
    std::vector<double> question_mean;
};

TableEncoding
encode_for_reader(const ReaderParams& rp, std::string_view question, const Table& t);

/// Representation of the token at `position` in the table's token order
/// (the order of flatten_table in full mode).
std::vector<double>
token_representation(const ReaderParams& rp, const Question& q, const Table& t, size_t position);

/// MLP([h_start | h_end]) per span. Throws on an empty span list.
std::vector<double>
score_spans(const ReaderParams& rp, const Question& q, const Table& t, std::span<const SpanCandidate> spans);

/// wc . mean(token reps) + bc
double
score_candidate(const ReaderParams& rp, const Question& q, const Table& t);

/// True if the span's tokens equal the tokens of any answer (case-folded).
bool
span_matches(const SpanCandidate& s, std::span<const std::string> answers);

/// One supervised reader example: candidate tables with the gold among them.
struct ReaderExample {
    Question question;
    std::vector<const Table*> candidates;
    size_t gold = 0;  // index into candidates
    std::vector<std::string> answers;
};

struct ReaderGrads {
    ColumnGrads embeddings;
    std::vector<double> dense;
};

struct ReaderLoss {
    double total = 0.0;
    double span = 0.0;       // marginal cross entropy over matching gold spans
    double candidate = 0.0;  // mean logistic loss over candidates
};

/// Mean loss over the examples and (optionally) its exact gradient.
/// Examples without a matching gold span are rejected.
ReaderLoss
reader_loss(const ReaderParams& rp, std::span<const ReaderExample> examples, ReaderGrads* grads);

/// Builds training examples from a run: top-k candidates plus the gold
/// table if missing. Examples whose gold table has no matching span are
/// skipped and counted.
struct ReaderData {
    std::vector<ReaderExample> examples;
    size_t skipped_no_span = 0;
    size_t skipped_no_gold = 0;
};

ReaderData
build_reader_data(const RetrievalRun& run, std::span<const QAExample> examples, const Corpus& c, size_t k,
                  int max_answer_len, bool include_header);

struct ReaderTrainOptions {
    int steps = 2000;
    int batch = 8;
    double learning_rate = 1e-3;
    uint64_t seed = 42;

    static ReaderTrainOptions
    from_config(const Config& cfg);
};

struct ReaderTrainResult {
    ReaderParams params;
    std::vector<ReaderLoss> log;  // one entry per step
};

ReaderTrainResult
train_reader(ReaderParams rp, std::span<const ReaderExample> data, const ReaderTrainOptions& opt);

enum class AnswerStatus { kOk, kNoSpans };

struct ReaderAnswer {
    AnswerStatus status = AnswerStatus::kNoSpans;
    std::string table_id;
    std::string text;
    double score = 0.0;  // candidate logit of the chosen table
    std::vector<CandidateAnswer> per_candidate;  // best span of each answerable candidate
};

/// Highest-logit candidate (ties by ascending table_id) among those with at
/// least one span; its best span is the answer. Throws on no candidates.
ReaderAnswer
answer(const ReaderParams& rp, const Question& q, std::span<const Table* const> candidates);

/// Predictions in example order from the top-k tables of each run list.
std::vector<Prediction>
answer_questions(const ReaderParams& rp, const RetrievalRun& run, std::span<const QAExample> examples,
                 const Corpus& c, size_t k, int threads = 1);

inline constexpr std::string_view kReaderMagic = "TQREADER";
inline constexpr uint32_t kReaderVersion = 1;

void
save_reader(const ReaderParams& rp, const std::filesystem::path& path);

ReaderParams
load_reader(const std::filesystem::path& path);

}  // namespace tqa
