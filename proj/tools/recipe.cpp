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

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <fstream>
#include <json.hpp>
#include <ostream>
#include <set>

#include "cli.h"

namespace tqa::cli {

namespace fs = std::filesystem;

namespace {

using Flags = std::vector<std::pair<std::string, std::string>>;

// Assembles stages whose flags start from the shared overrides.
class RecipeBuilder {
public:
    RecipeBuilder(std::string name, const std::map<std::string, std::string>& overrides)
        : overrides_(overrides) {
        recipe_.name = std::move(name);
    }

    void
    add(const std::string& subcommand, const Flags& flags) {
        std::map<std::string, std::string> merged = overrides_;
        for (const auto& [k, v] : flags) {
            merged[k] = v;
        }
        Stage s{subcommand, {}};
        for (const auto& [k, v] : merged) {
            if (!v.empty() || !is_path_flag(k)) {
                s.flags.emplace_back(k, v);
            }
        }
        recipe_.stages.push_back(std::move(s));
    }

    PipelineRecipe
    take() {
        return std::move(recipe_);
    }

private:
    // Optional file flags are dropped when the recipe was not given that file.
    static bool
    is_path_flag(const std::string& k) {
        return k == "dev-questions" || k == "dev-tables" || k == "init" || k == "negatives";
    }

    std::map<std::string, std::string> overrides_;
    PipelineRecipe recipe_;
};

struct Paths {
    std::string tables, dev_tables, train, dev, test;
    fs::path w;

    std::string
    at(const std::string& file) const {
        return (w / file).string();
    }
};

Flags
dev_flags(const Paths& p) {
    return {{"dev-questions", p.dev}, {"dev-tables", p.dev_tables}};
}

Flags
concat(Flags a, const Flags& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

void
pretrain_stages(RecipeBuilder& b, const Paths& p) {
    b.add("pretrain-pairs", {{"tables", p.tables}, {"out", p.at("pairs.jsonl")}});
    b.add("pretrain", concat({{"tables", p.tables}, {"pairs", p.at("pairs.jsonl")}, {"out", p.at("pretrain.ckpt")}},
                             dev_flags(p)));
}

// Encodes the corpus with `ckpt` and retrieves for `questions` into `run`.
void
dense_retrieve(RecipeBuilder& b, const Paths& p, const std::string& ckpt, const std::string& questions,
               const std::string& run, const Flags& extra = {}) {
    const auto emb = p.at(fs::path(ckpt).stem().string() + ".emb");
    b.add("encode-corpus", {{"checkpoint", ckpt}, {"tables", p.tables}, {"out", emb}});
    b.add("retrieve", concat({{"index", emb}, {"checkpoint", ckpt}, {"questions", questions}, {"out", run}}, extra));
}

void
evaluate(RecipeBuilder& b, const Paths& p, const std::string& run) {
    b.add("eval-retrieval", {{"run", run}, {"questions", p.test}, {"out", p.at("report.json")}});
}

// Pretrain, train, then mine negatives with the trained model and retrain from the pre-trained weights.
std::string
hard_negative_stages(RecipeBuilder& b, const Paths& p, const Config& cfg) {
    pretrain_stages(b, p);
    b.add("train", concat({{"tables", p.tables},
                           {"questions", p.train},
                           {"init", p.at("pretrain.ckpt")},
                           {"out", p.at("dtr.ckpt")}},
                          dev_flags(p)));
    dense_retrieve(b, p, p.at("dtr.ckpt"), p.train, p.at("run.train.tsv"),
                   {{"top_k", std::to_string(cfg.mine_depth)}});
    b.add("mine", {{"run", p.at("run.train.tsv")},
                   {"questions", p.train},
                   {"tables", p.tables},
                   {"out", p.at("negatives.tsv")}});
    b.add("train", concat({{"tables", p.tables},
                           {"questions", p.train},
                           {"init", p.at("pretrain.ckpt")},
                           {"negatives", p.at("negatives.tsv")},
                           {"out", p.at("dtr_hn.ckpt")}},
                          dev_flags(p)));
    return p.at("dtr_hn.ckpt");
}

}  // namespace

const std::vector<std::string>&
recipe_names() {
    static const std::vector<std::string> names{"bm25_baseline", "dtr",           "dtr_text",        "dtr_schema",
                                                "dtr_minus_pt",  "dtr_plus_hnbm25", "dtr_plus_hn", "qa"};
    return names;
}

PipelineRecipe
make_recipe(const std::string& name, const RecipeInputs& in, const Config& cfg,
            const std::map<std::string, std::string>& overrides) {
    const Paths p{in.tables.string(),          in.dev_tables.string(),    in.train_questions.string(),
                  in.dev_questions.string(), in.test_questions.string(), in.workdir};
    RecipeBuilder b(name, overrides);
    if (name == "bm25_baseline") {
        b.add("index-bm25", {{"in", p.tables}, {"out", p.at("bm25.idx")}});
        b.add("retrieve", {{"index", p.at("bm25.idx")}, {"questions", p.test}, {"out", p.at("run.test.tsv")}});
        evaluate(b, p, p.at("run.test.tsv"));
    } else if (name == "dtr" || name == "dtr_text" || name == "dtr_schema" || name == "dtr_minus_pt") {
        // Text-only drops the structural feature channels; schema-only encodes title and header alone.
        Flags variant;
        if (name == "dtr_text") {
            variant = {{"use_structure", "false"}};
        } else if (name == "dtr_schema") {
            variant = {{"schema_only", "true"}};
        }
        Flags train_flags{{"tables", p.tables}, {"questions", p.train}, {"out", p.at("dtr.ckpt")}};
        if (name != "dtr_minus_pt") {
            b.add("pretrain-pairs", {{"tables", p.tables}, {"out", p.at("pairs.jsonl")}});
            b.add("pretrain", concat(concat({{"tables", p.tables},
                                             {"pairs", p.at("pairs.jsonl")},
                                             {"out", p.at("pretrain.ckpt")}},
                                            dev_flags(p)),
                                     variant));
            train_flags.emplace_back("init", p.at("pretrain.ckpt"));
        }
        b.add("train", concat(concat(train_flags, dev_flags(p)), variant));
        dense_retrieve(b, p, p.at("dtr.ckpt"), p.test, p.at("run.test.tsv"));
        evaluate(b, p, p.at("run.test.tsv"));
    } else if (name == "dtr_plus_hnbm25") {
        b.add("index-bm25", {{"in", p.tables}, {"out", p.at("bm25.idx")}});
        b.add("retrieve", {{"index", p.at("bm25.idx")},
                           {"questions", p.train},
                           {"out", p.at("run.train.bm25.tsv")},
                           {"top_k", std::to_string(cfg.mine_depth)}});
        b.add("mine", {{"run", p.at("run.train.bm25.tsv")},
                       {"questions", p.train},
                       {"tables", p.tables},
                       {"out", p.at("negatives.bm25.tsv")}});
        pretrain_stages(b, p);
        b.add("train", concat({{"tables", p.tables},
                               {"questions", p.train},
                               {"init", p.at("pretrain.ckpt")},
                               {"negatives", p.at("negatives.bm25.tsv")},
                               {"out", p.at("dtr_hnbm25.ckpt")}},
                              dev_flags(p)));
        dense_retrieve(b, p, p.at("dtr_hnbm25.ckpt"), p.test, p.at("run.test.tsv"));
        evaluate(b, p, p.at("run.test.tsv"));
    } else if (name == "dtr_plus_hn") {
        const auto ckpt = hard_negative_stages(b, p, cfg);
        dense_retrieve(b, p, ckpt, p.test, p.at("run.test.tsv"));
        evaluate(b, p, p.at("run.test.tsv"));
    } else if (name == "qa") {
        const auto ckpt = hard_negative_stages(b, p, cfg);
        dense_retrieve(b, p, ckpt, p.train, p.at("run.train.final.tsv"));
        b.add("retrieve", {{"index", p.at("dtr_hn.emb")},
                           {"checkpoint", ckpt},
                           {"questions", p.test},
                           {"out", p.at("run.test.tsv")}});
        evaluate(b, p, p.at("run.test.tsv"));
        b.add("train-reader", {{"tables", p.tables},
                               {"questions", p.train},
                               {"run", p.at("run.train.final.tsv")},
                               {"out", p.at("reader.bin")}});
        b.add("answer", {{"reader", p.at("reader.bin")},
                         {"questions", p.test},
                         {"run", p.at("run.test.tsv")},
                         {"tables", p.tables},
                         {"out", p.at("predictions.jsonl")}});
        b.add("eval-qa", {{"pred", p.at("predictions.jsonl")},
                          {"questions", p.test},
                          {"out", p.at("report.qa.json")}});
    } else {
        throw Error(fmt::format("unknown recipe {} (known: {})", name, fmt::join(recipe_names(), ", ")));
    }
    return b.take();
}

StageFiles
stage_files(const Stage& s) {
    static const std::set<std::string> inputs{"in",         "index",         "questions", "checkpoint", "tables",
                                              "pairs",      "init",          "negatives", "dev-questions",
                                              "dev-tables", "run",           "reader",    "pred",
                                              "pred-a",     "pred-b",        "config"};
    StageFiles f;
    for (const auto& [k, v] : s.flags) {
        if (k == "out" || k == "log" || (k == "map" && s.subcommand == "dedup")) {
            f.outputs.push_back(v);
        } else if (inputs.contains(k) || k == "map") {
            f.inputs.push_back(v);
        }
    }
    // Training and reader stages write a log beside the checkpoint unless told otherwise.
    const bool logs = s.subcommand == "pretrain" || s.subcommand == "train" || s.subcommand == "train-reader";
    const bool has_log = std::any_of(s.flags.begin(), s.flags.end(), [](const auto& kv) { return kv.first == "log"; });
    if (logs && !has_log) {
        for (const auto& [k, v] : s.flags) {
            if (k == "out") {
                f.outputs.push_back(v + ".log.tsv");
            }
        }
    }
    return f;
}

void
check_recipe_inputs(const PipelineRecipe& r) {
    std::set<std::string> produced;
    for (size_t i = 0; i < r.stages.size(); ++i) {
        const auto& s = r.stages[i];
        const auto files = stage_files(s);
        for (const auto& path : files.inputs) {
            if (path.empty()) {
                throw Error(fmt::format("recipe {}: stage {} ({}) is missing a required input file", r.name, i + 1,
                                        s.subcommand));
            }
            if (!produced.contains(path) && !fs::exists(path)) {
                throw Error(fmt::format("recipe {}: stage {} ({}) input {} does not exist", r.name, i + 1,
                                        s.subcommand, path));
            }
        }
        produced.insert(files.outputs.begin(), files.outputs.end());
    }
}

int
run_recipe(const PipelineRecipe& r, const fs::path& manifest, std::ostream& out, std::ostream& err) {
    std::ofstream log(manifest, std::ios::binary | std::ios::app);
    if (!log) {
        throw Error(fmt::format("cannot write {}", manifest.string()));
    }
    auto hashes = [](const std::vector<std::string>& paths) {
        nlohmann::ordered_json j = nlohmann::ordered_json::object();
        for (const auto& p : paths) {
            j[p] = fs::exists(p) ? hash_file(p) : std::string("missing");
        }
        return j;
    };
    for (size_t i = 0; i < r.stages.size(); ++i) {
        const auto& s = r.stages[i];
        std::vector<std::string> args{s.subcommand};
        for (const auto& [k, v] : s.flags) {
            args.push_back("--" + k);
            if (!v.empty()) {
                args.push_back(v);
            }
        }
        const auto files = stage_files(s);
        nlohmann::ordered_json entry;
        entry["recipe"] = r.name;
        entry["version"] = version();
        entry["stage"] = i + 1;
        entry["subcommand"] = s.subcommand;
        entry["args"] = args;
        entry["inputs"] = hashes(files.inputs);
        err << fmt::format("[{}/{}] {}\n", i + 1, r.stages.size(), fmt::join(args, " "));
        const auto t0 = std::chrono::steady_clock::now();
        const int status = run(args, out, err);
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        entry["outputs"] = hashes(files.outputs);
        entry["wall_time_s"] = secs;
        entry["status"] = status;
        log << entry.dump() << '\n';
        log.flush();
        if (status != 0) {
            err << fmt::format("recipe {} stopped at stage {} ({}) with status {}\n", r.name, i + 1, s.subcommand,
                               status);
            return status;
        }
    }
    return 0;
}

}  // namespace tqa::cli
