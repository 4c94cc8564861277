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

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "tqa/util.h"

namespace tqa {

/// A table as it appears in the corpus. Every row has header.size() cells.
struct Table {
    std::string table_id;
    std::string page_title;
    std::string page_version;
    std::optional<std::string> section_title;
    std::optional<std::string> caption;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    bool is_infobox = false;

    size_t
    num_columns() const {
        return header.size();
    }

    size_t
    num_rows() const {
        return rows.size();
    }

    bool
    operator==(const Table&) const = default;
};

/// Throws Error when a table violates its structural invariants.
void
validate_table(const Table& t);

struct Question {
    std::string question_id;
    std::string text;

    bool
    operator==(const Question&) const = default;
};

struct QAExample {
    Question question;
    std::optional<std::string> gold_table_id;
    std::vector<std::string> answers;

    bool
    operator==(const QAExample&) const = default;
};

struct TextTablePair {
    std::string text;
    std::string table_id;

    bool
    operator==(const TextTablePair&) const = default;
};

/// Id-keyed table collection that iterates in insertion order.
class Corpus {
public:
    Corpus() = default;
    explicit Corpus(std::vector<Table> tables);

    /// Throws on duplicate table_id or invalid table.
    void
    add(Table t);

    size_t
    size() const {
        return tables_.size();
    }

    bool
    empty() const {
        return tables_.empty();
    }

    const Table&
    operator[](size_t i) const {
        return tables_[i];
    }

    const Table*
    find(std::string_view id) const;

    std::optional<size_t>
    index_of(std::string_view id) const;

    const std::vector<Table>&
    tables() const {
        return tables_;
    }

    auto
    begin() const {
        return tables_.begin();
    }

    auto
    end() const {
        return tables_.end();
    }

    bool
    operator==(const Corpus& o) const {
        return tables_ == o.tables_;
    }

private:
    std::vector<Table> tables_;
    std::unordered_map<std::string, size_t> by_id_;
};

/// Transposes infobox tables so keys become the header; other tables are
/// returned unchanged. The output always has is_infobox cleared.
Table
normalize_table(const Table& t);

// Values the reference system reports; desk-scale defaults below override some.
inline constexpr int kReferenceEmbedDim = 256;
inline constexpr int kReferenceTopK = 10;
inline constexpr int kReferenceBatchSize = 256;
inline constexpr double kReferenceLearningRate = 1.25e-5;
inline constexpr double kReferenceDropout = 0.2;
inline constexpr int kReferenceMaxAnswerLen = 10;
inline constexpr int kReferenceBm25Boost = 15;
inline constexpr double kReferenceDedupThreshold = 0.91;
inline constexpr int kReferenceMaxSteps = 200000;
inline constexpr int kReferenceReaderBatchSize = 512;
inline constexpr double kReferenceReaderLearningRate = 1e-6;
inline constexpr int kReferenceReaderSteps = 50000;

struct Config {
    int embed_dim = kReferenceEmbedDim;
    int top_k = kReferenceTopK;
    int batch_size = 16;
    double learning_rate = 1e-3;
    double dropout = kReferenceDropout;
    int max_answer_len = kReferenceMaxAnswerLen;
    int bm25_boost = kReferenceBm25Boost;
    double bm25_k1 = 1.2;
    double bm25_b = 0.75;
    double dedup_threshold = kReferenceDedupThreshold;
    uint64_t seed = 42;

    int feature_dims = 1 << 18;
    bool use_structure = true;
    bool schema_only = false;

    int max_steps = 2000;
    double warmup_frac = 0.1;
    int eval_every = 100;
    int patience = 5;

    int ict_per_table = 1;
    int mine_depth = 100;

    int reader_dim = 64;
    int reader_hidden = 64;
    int reader_feature_dims = 1 << 18;
    double reader_lr = 1e-3;
    int reader_steps = 2000;
    int reader_batch = 8;
    bool reader_include_header = true;

    int threads = 1;

    /// Sets a key from its textual value. Throws on unknown key or bad value.
    void
    set(std::string_view key, std::string_view value);

    std::string
    get(std::string_view key) const;

    /// Throws Error naming the first out-of-range field.
    void
    validate() const;

    /// Retriever and reader hyperparameters at the reference system's scale.
    static Config
    full_scale();
};

struct ConfigKey {
    std::string name;
    std::string help;
};

const std::vector<ConfigKey>&
config_keys();

/// Applies a flat key=value file ('#' comments, blank lines allowed).
void
apply_config_file(Config& cfg, const std::filesystem::path& path);

// JSONL I/O. Errors name the file and 1-based line number.
Corpus
load_corpus(const std::filesystem::path& path);

void
save_corpus(const Corpus& c, const std::filesystem::path& path);

std::vector<QAExample>
load_questions(const std::filesystem::path& path);

void
save_questions(const std::vector<QAExample>& qs, const std::filesystem::path& path);

std::vector<TextTablePair>
load_pairs(const std::filesystem::path& path);

void
save_pairs(const std::vector<TextTablePair>& pairs, const std::filesystem::path& path);

std::string
table_to_json_line(const Table& t);

Table
table_from_json_line(std::string_view line);

}  // namespace tqa
