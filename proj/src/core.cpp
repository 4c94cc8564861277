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

#include "tqa/core.h"

#include <fmt/format.h>

#include <charconv>
#include <fstream>
#include <functional>
#include <json.hpp>
#include <variant>

namespace tqa {

using ojson = nlohmann::ordered_json;

void
validate_table(const Table& t) {
    if (t.table_id.empty()) {
        throw Error("table has an empty table_id");
    }
    if (t.header.empty()) {
        throw Error(fmt::format("table {} has an empty header", t.table_id));
    }
    for (size_t r = 0; r < t.rows.size(); ++r) {
        if (t.rows[r].size() != t.header.size()) {
            throw Error(fmt::format("table {} row {} has {} cells, header has {}",
                                    t.table_id, r, t.rows[r].size(), t.header.size()));
        }
    }
}

Corpus::Corpus(std::vector<Table> tables) {
    tables_.reserve(tables.size());
    for (auto& t : tables) {
        add(std::move(t));
    }
}

void
Corpus::add(Table t) {
    validate_table(t);
    auto [it, inserted] = by_id_.emplace(t.table_id, tables_.size());
    if (!inserted) {
        throw Error(fmt::format("duplicate table_id {}", t.table_id));
    }
    tables_.push_back(std::move(t));
}

const Table*
Corpus::find(std::string_view id) const {
    auto it = by_id_.find(std::string(id));
    return it == by_id_.end() ? nullptr : &tables_[it->second];
}

std::optional<size_t>
Corpus::index_of(std::string_view id) const {
    auto it = by_id_.find(std::string(id));
    if (it == by_id_.end()) {
        return std::nullopt;
    }
    return it->second;
}

Table
normalize_table(const Table& t) {
    Table out = t;
    out.is_infobox = false;
    if (!t.is_infobox) {
        return out;
    }
    // Key/value layout: column 0 holds the keys, which become the header;
    // each remaining column becomes one data row.
    if (t.rows.empty()) {
        throw Error(fmt::format("infobox {} has no rows to transpose", t.table_id));
    }
    const size_t width = t.header.size();
    out.header.clear();
    out.rows.assign(width - 1, {});
    for (const auto& row : t.rows) {
        if (row.size() != width) {
            throw Error(fmt::format("infobox {} is ragged", t.table_id));
        }
        out.header.push_back(row[0]);
        for (size_t c = 1; c < width; ++c) {
            out.rows[c - 1].push_back(row[c]);
        }
    }
    validate_table(out);
    return out;
}

// ---------------------------------------------------------------------------
// Config

namespace {

template <typename T>
T
parse_number(std::string_view key, std::string_view value) {
    T out{};
    if constexpr (std::is_floating_point_v<T>) {
        try {
            size_t used = 0;
            out = static_cast<T>(std::stod(std::string(value), &used));
            if (used != value.size()) {
                throw std::invalid_argument("trailing");
            }
        } catch (const std::exception&) {
            throw Error(fmt::format("config key {}: '{}' is not a number", key, value));
        }
    } else {
        auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
        if (ec != std::errc() || ptr != value.data() + value.size()) {
            throw Error(fmt::format("config key {}: '{}' is not an integer", key, value));
        }
    }
    return out;
}

bool
parse_bool(std::string_view key, std::string_view value) {
    if (value == "true" || value == "1" || value == "yes" || value == "on") {
        return true;
    }
    if (value == "false" || value == "0" || value == "no" || value == "off") {
        return false;
    }
    throw Error(fmt::format("config key {}: '{}' is not a boolean", key, value));
}

using Field = std::variant<int Config::*, double Config::*, bool Config::*, uint64_t Config::*>;

struct Entry {
    ConfigKey key;
    Field field;
};

const std::vector<Entry>&
entries() {
    static const std::vector<Entry> table = {
        {{"embed_dim", "dense embedding dimension d"}, &Config::embed_dim},
        {{"top_k", "number of retrieved candidate tables K"}, &Config::top_k},
        {{"batch_size", "retriever batch size B"}, &Config::batch_size},
        {{"learning_rate", "retriever Adam learning rate"}, &Config::learning_rate},
        {{"dropout", "feature dropout rate during training"}, &Config::dropout},
        {{"max_answer_len", "maximum answer span length in tokens"}, &Config::max_answer_len},
        {{"bm25_boost", "repeat count for title and header tokens in BM25"}, &Config::bm25_boost},
        {{"bm25_k1", "BM25 term-frequency saturation k1"}, &Config::bm25_k1},
        {{"bm25_b", "BM25 length normalization b"}, &Config::bm25_b},
        {{"dedup_threshold", "cosine similarity a merge must exceed"}, &Config::dedup_threshold},
        {{"seed", "random seed"}, &Config::seed},
        {{"feature_dims", "hashed feature space size for the encoder"}, &Config::feature_dims},
        {{"use_structure", "add segment and column features on the table side"}, &Config::use_structure},
        {{"schema_only", "encode tables from title and header only"}, &Config::schema_only},
        {{"max_steps", "maximum optimizer steps"}, &Config::max_steps},
        {{"warmup_frac", "fraction of max_steps used for linear warm-up"}, &Config::warmup_frac},
        {{"eval_every", "steps between dev recall@10 evaluations"}, &Config::eval_every},
        {{"patience", "evaluations without improvement before stopping"}, &Config::patience},
        {{"ict_per_table", "pre-training spans sampled per table"}, &Config::ict_per_table},
        {{"mine_depth", "ranks scanned per question when mining negatives"}, &Config::mine_depth},
        {{"reader_dim", "reader token representation size"}, &Config::reader_dim},
        {{"reader_hidden", "reader span MLP hidden size"}, &Config::reader_hidden},
        {{"reader_feature_dims", "hashed feature space size for the reader"}, &Config::reader_feature_dims},
        {{"reader_lr", "reader Adam learning rate"}, &Config::reader_lr},
        {{"reader_steps", "reader optimizer steps"}, &Config::reader_steps},
        {{"reader_batch", "reader batch size"}, &Config::reader_batch},
        {{"reader_include_header", "allow answers in header cells"}, &Config::reader_include_header},
        {{"threads", "worker threads for parallel stages"}, &Config::threads},
    };
    return table;
}

const Entry&
find_entry(std::string_view key) {
    for (const auto& e : entries()) {
        if (e.key.name == key) {
            return e;
        }
    }
    throw Error(fmt::format("unknown config key '{}'", key));
}

std::string
trim(std::string_view s) {
    const auto* ws = " \t\r\n";
    auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) {
        return {};
    }
    auto e = s.find_last_not_of(ws);
    return std::string(s.substr(b, e - b + 1));
}

}  // namespace

const std::vector<ConfigKey>&
config_keys() {
    static const std::vector<ConfigKey> keys = [] {
        std::vector<ConfigKey> out;
        for (const auto& e : entries()) {
            out.push_back(e.key);
        }
        return out;
    }();
    return keys;
}

void
Config::set(std::string_view key, std::string_view value) {
    const auto& e = find_entry(key);
    std::visit(
        [&](auto member) {
            using T = std::remove_reference_t<decltype(this->*member)>;
            if constexpr (std::is_same_v<T, bool>) {
                this->*member = parse_bool(key, value);
            } else {
                this->*member = parse_number<T>(key, value);
            }
        },
        e.field);
}

std::string
Config::get(std::string_view key) const {
    const auto& e = find_entry(key);
    return std::visit(
        [&](auto member) -> std::string {
            using T = std::remove_cvref_t<decltype(this->*member)>;
            if constexpr (std::is_same_v<T, bool>) {
                return (this->*member) ? "true" : "false";
            } else {
                return fmt::format("{}", this->*member);
            }
        },
        e.field);
}

void
Config::validate() const {
    auto positive = [](const char* name, double v) {
        if (!(v > 0)) {
            throw Error(fmt::format("config {} must be positive (got {})", name, v));
        }
    };
    positive("embed_dim", embed_dim);
    positive("top_k", top_k);
    positive("batch_size", batch_size);
    positive("learning_rate", learning_rate);
    positive("max_answer_len", max_answer_len);
    positive("bm25_boost", bm25_boost);
    positive("bm25_k1", bm25_k1);
    positive("reader_dim", reader_dim);
    positive("reader_hidden", reader_hidden);
    positive("reader_lr", reader_lr);
    positive("reader_batch", reader_batch);
    positive("ict_per_table", ict_per_table);
    positive("mine_depth", mine_depth);
    positive("eval_every", eval_every);
    positive("threads", threads);
    if (dropout < 0.0 || dropout >= 1.0) {
        throw Error(fmt::format("config dropout must be in [0, 1) (got {})", dropout));
    }
    if (bm25_b < 0.0 || bm25_b > 1.0) {
        throw Error(fmt::format("config bm25_b must be in [0, 1] (got {})", bm25_b));
    }
    if (warmup_frac < 0.0 || warmup_frac > 1.0) {
        throw Error(fmt::format("config warmup_frac must be in [0, 1] (got {})", warmup_frac));
    }
    if (feature_dims < 1024 || reader_feature_dims < 1024) {
        throw Error("config feature_dims and reader_feature_dims must be at least 1024");
    }
    if (max_steps < 0 || reader_steps < 0 || patience < 0) {
        throw Error("config step counts must be non-negative");
    }
}

Config
Config::full_scale() {
    Config c;
    c.batch_size = kReferenceBatchSize;
    c.learning_rate = kReferenceLearningRate;
    c.max_steps = kReferenceMaxSteps;
    c.reader_batch = kReferenceReaderBatchSize;
    c.reader_lr = kReferenceReaderLearningRate;
    c.reader_steps = kReferenceReaderSteps;
    return c;
}

void
apply_config_file(Config& cfg, const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(fmt::format("cannot open config {}", path.string()));
    }
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto text = trim(line.substr(0, line.find('#')));
        if (text.empty()) {
            continue;
        }
        auto eq = text.find('=');
        if (eq == std::string::npos) {
            throw Error(fmt::format("{}:{}: expected key=value", path.string(), lineno));
        }
        try {
            cfg.set(trim(text.substr(0, eq)), trim(text.substr(eq + 1)));
        } catch (const Error& e) {
            throw Error(fmt::format("{}:{}: {}", path.string(), lineno, e.what()));
        }
    }
}

// ---------------------------------------------------------------------------
// JSONL

namespace {

std::optional<std::string>
optional_string(const nlohmann::json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) {
        return std::nullopt;
    }
    return it->get<std::string>();
}

template <typename Fn>
void
for_each_line(const std::filesystem::path& path, Fn&& fn) {
    std::ifstream in(path);
    if (!in) {
        throw Error(fmt::format("cannot open {}", path.string()));
    }
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) {
            continue;
        }
        try {
            fn(line);
        } catch (const std::exception& e) {
            throw Error(fmt::format("{}:{}: {}", path.string(), lineno, e.what()));
        }
    }
}

void
write_lines(const std::filesystem::path& path, const std::vector<std::string>& lines) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(fmt::format("cannot write {}", path.string()));
    }
    for (const auto& l : lines) {
        out << l << '\n';
    }
    if (!out) {
        throw Error(fmt::format("write failed for {}", path.string()));
    }
}

}  // namespace

std::string
table_to_json_line(const Table& t) {
    ojson j;
    j["table_id"] = t.table_id;
    j["page_title"] = t.page_title;
    j["page_version"] = t.page_version;
    j["section_title"] = t.section_title ? ojson(*t.section_title) : ojson(nullptr);
    j["caption"] = t.caption ? ojson(*t.caption) : ojson(nullptr);
    j["header"] = t.header;
    j["rows"] = t.rows;
    j["is_infobox"] = t.is_infobox;
    return j.dump();
}

Table
table_from_json_line(std::string_view line) {
    auto j = nlohmann::json::parse(line);
    Table t;
    t.table_id = j.at("table_id").get<std::string>();
    t.page_title = j.at("page_title").get<std::string>();
    t.page_version = j.value("page_version", std::string());
    t.section_title = optional_string(j, "section_title");
    t.caption = optional_string(j, "caption");
    t.header = j.at("header").get<std::vector<std::string>>();
    t.rows = j.at("rows").get<std::vector<std::vector<std::string>>>();
    t.is_infobox = j.value("is_infobox", false);
    validate_table(t);
    return t;
}

Corpus
load_corpus(const std::filesystem::path& path) {
    Corpus c;
    for_each_line(path, [&](const std::string& line) { c.add(table_from_json_line(line)); });
    return c;
}

void
save_corpus(const Corpus& c, const std::filesystem::path& path) {
    std::vector<std::string> lines;
    lines.reserve(c.size());
    for (const auto& t : c) {
        lines.push_back(table_to_json_line(t));
    }
    write_lines(path, lines);
}

std::vector<QAExample>
load_questions(const std::filesystem::path& path) {
    std::vector<QAExample> out;
    for_each_line(path, [&](const std::string& line) {
        auto j = nlohmann::json::parse(line);
        QAExample ex;
        ex.question.question_id = j.at("question_id").get<std::string>();
        ex.question.text = j.at("text").get<std::string>();
        ex.gold_table_id = optional_string(j, "gold_table_id");
        if (j.contains("answers")) {
            ex.answers = j.at("answers").get<std::vector<std::string>>();
        }
        if (ex.question.question_id.empty()) {
            throw Error("empty question_id");
        }
        out.push_back(std::move(ex));
    });
    return out;
}

void
save_questions(const std::vector<QAExample>& qs, const std::filesystem::path& path) {
    std::vector<std::string> lines;
    for (const auto& q : qs) {
        ojson j;
        j["question_id"] = q.question.question_id;
        j["text"] = q.question.text;
        j["gold_table_id"] = q.gold_table_id ? ojson(*q.gold_table_id) : ojson(nullptr);
        j["answers"] = q.answers;
        lines.push_back(j.dump());
    }
    write_lines(path, lines);
}

std::vector<TextTablePair>
load_pairs(const std::filesystem::path& path) {
    std::vector<TextTablePair> out;
    for_each_line(path, [&](const std::string& line) {
        auto j = nlohmann::json::parse(line);
        TextTablePair p{j.at("text").get<std::string>(), j.at("table_id").get<std::string>()};
        if (p.text.empty()) {
            throw Error("pair text is empty");
        }
        out.push_back(std::move(p));
    });
    return out;
}

void
save_pairs(const std::vector<TextTablePair>& pairs, const std::filesystem::path& path) {
    std::vector<std::string> lines;
    for (const auto& p : pairs) {
        ojson j;
        j["text"] = p.text;
        j["table_id"] = p.table_id;
        lines.push_back(j.dump());
    }
    write_lines(path, lines);
}

}  // namespace tqa
