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

#include <CLI11.hpp>
#include <fstream>
#include <functional>
#include <json.hpp>
#include <ostream>
#include <set>
#include <unistd.h>

#include "cli.h"
#include "tqa/bm25.h"
#include "tqa/dedup.h"
#include "tqa/encoder.h"
#include "tqa/index.h"
#include "tqa/metrics.h"
#include "tqa/miner.h"
#include "tqa/reader.h"
#include "tqa/synthetic.h"
#include "tqa/training.h"

namespace tqa::cli {

namespace fs = std::filesystem;

std::string
version() {
    return TQA_VERSION;
}

namespace {

// Config keys exposed as flags on every subcommand, plus short aliases.
struct ConfigFlags {
    std::string config_file;
    std::map<std::string, std::string> values;
    std::map<std::string, CLI::Option*> options;
};

void
add_config_flags(CLI::App* sub, ConfigFlags& f, bool k_alias = true) {
    sub->add_option("--config", f.config_file, "flat key=value config file")->check(CLI::ExistingFile);
    const Config defaults;
    for (const auto& key : config_keys()) {
        std::string names = "--" + key.name;
        if (key.name == "top_k" && k_alias) {
            names += ",--k";
        } else if (key.name == "bm25_boost") {
            names += ",--boost";
        } else if (key.name == "dedup_threshold") {
            names += ",--threshold";
        } else if (key.name == "mine_depth") {
            names += ",--depth";
        }
        auto* opt = sub->add_option(names, f.values[key.name], key.help);
        opt->default_str(defaults.get(key.name))->group("Config");
        f.options[key.name] = opt;
    }
}

Config
resolve(const ConfigFlags& f) {
    Config cfg;
    if (!f.config_file.empty()) {
        apply_config_file(cfg, f.config_file);
    }
    for (const auto& [key, opt] : f.options) {
        if (opt->count() > 0) {
            cfg.set(key, f.values.at(key));
        }
    }
    cfg.validate();
    return cfg;
}

std::map<std::string, std::string>
given_flags(const ConfigFlags& f) {
    std::map<std::string, std::string> out;
    if (!f.config_file.empty()) {
        out["config"] = f.config_file;
    }
    for (const auto& [key, opt] : f.options) {
        if (opt->count() > 0) {
            out[key] = f.values.at(key);
        }
    }
    return out;
}

std::vector<QAExample>
with_gold(std::vector<QAExample> qs, size_t* skipped = nullptr) {
    std::vector<QAExample> out;
    for (auto& q : qs) {
        if (q.gold_table_id) {
            out.push_back(std::move(q));
        }
    }
    if (skipped) {
        *skipped = qs.size() - out.size();
    }
    return out;
}

std::optional<DevSet>
load_dev(const Corpus& c, const std::string& questions, const std::string& tables) {
    if (questions.empty()) {
        if (!tables.empty()) {
            throw Error("--dev-tables needs --dev-questions");
        }
        return std::nullopt;
    }
    DevSet dev;
    dev.examples = with_gold(load_questions(questions));
    if (dev.examples.empty()) {
        throw Error(fmt::format("{} has no questions with a gold table", questions));
    }
    if (!tables.empty()) {
        dev.tables = load_corpus(tables);
        return dev;
    }
    // Without an explicit file the dev corpus is the dev questions' gold tables.
    std::set<std::string> seen;
    for (const auto& ex : dev.examples) {
        const auto* t = c.find(*ex.gold_table_id);
        if (!t) {
            throw Error(fmt::format("dev question {} names unknown table {}", ex.question.question_id,
                                    *ex.gold_table_id));
        }
        if (seen.insert(t->table_id).second) {
            dev.tables.add(*t);
        }
    }
    return dev;
}

size_t
table_index(const Corpus& c, const std::string& id, std::string_view what) {
    auto i = c.index_of(id);
    if (!i) {
        throw Error(fmt::format("{} names unknown table {}", what, id));
    }
    return *i;
}

EncoderParams
initial_encoder(const std::string& init, const Config& cfg) {
    if (!init.empty()) {
        return load_checkpoint(init);
    }
    return make_encoder(EncoderOptions::from_config(cfg));
}

void
write_text(const std::string& path, const std::string& text, std::ostream& out) {
    if (path.empty()) {
        out << text << '\n';
        return;
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) {
        throw Error(fmt::format("cannot write {}", path));
    }
    f << text << '\n';
}

std::string
file_magic(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(fmt::format("cannot open {}", path));
    }
    std::string magic(8, '\0');
    in.read(magic.data(), 8);
    magic.resize(static_cast<size_t>(in.gcount()));
    return magic;
}

int
train_encoder(const Config& cfg, const Corpus& c, const std::vector<TrainExample>& data, const std::string& init,
              const std::string& dev_q, const std::string& dev_t, const std::string& out_path,
              std::string log_path, std::ostream& out, std::ostream& err) {
    auto dev = load_dev(c, dev_q, dev_t);
    if (dev && dev->tables.size() <= static_cast<size_t>(cfg.top_k)) {
        err << fmt::format("warning: the dev corpus has {} tables, so dev recall@{} is always 1 and early "
                           "stopping can only use MRR; pass --dev-tables with a larger corpus\n",
                           dev->tables.size(), cfg.top_k);
    }
    auto result = train(TrainState(initial_encoder(init, cfg)), c, data, dev ? &*dev : nullptr,
                        TrainOptions::from_config(cfg));
    save_checkpoint(result.state.params, out_path);
    if (log_path.empty()) {
        log_path = out_path + ".log.tsv";
    }
    save_train_log(result.log, log_path);
    out << fmt::format("trained on {} examples: {} steps logged, best step {}", data.size(), result.log.size(),
                       result.best_step);
    if (dev) {
        out << fmt::format(", dev recall@{} {:.4f}", cfg.top_k, result.state.best_recall);
    }
    out << '\n';
    return 0;
}

}  // namespace

int
run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Open-domain question answering over tables: retrieval, training, reading and evaluation."};
    app.name("tqa");
    app.set_version_flag("--version", version());
    app.require_subcommand(1);
    {
        std::string keys;
        for (const auto& k : config_keys()) {
            keys += fmt::format("  {:<24}{}\n", k.name, k.help);
        }
        app.footer("Every subcommand accepts these config keys as --key VALUE (after --config FILE):\n" + keys);
    }

    std::function<int()> action;
    std::vector<std::unique_ptr<ConfigFlags>> flag_sets;
    auto subcommand = [&](const std::string& name, const std::string& help, bool k_alias = true) {
        auto* sub = app.add_subcommand(name, help);
        flag_sets.push_back(std::make_unique<ConfigFlags>());
        add_config_flags(sub, *flag_sets.back(), k_alias);
        return std::pair{sub, flag_sets.back().get()};
    };

    // Plain string storage for every path flag; lifetime covers parse and action.
    std::map<std::string, std::string> s;
    auto path_opt = [&](CLI::App* sub, const std::string& flag, const std::string& help, bool required) {
        auto* o = sub->add_option("--" + flag, s[sub->get_name() + "/" + flag], help);
        if (required) {
            o->required();
        }
        return o;
    };
    auto val = [&](CLI::App* sub, const std::string& flag) -> const std::string& {
        return s[sub->get_name() + "/" + flag];
    };

    {
        auto [sub, f] = subcommand("dedup", "Normalize infoboxes and merge near-duplicate tables of each page");
        path_opt(sub, "in", "input tables.jsonl", true);
        path_opt(sub, "out", "deduplicated tables.jsonl", true);
        path_opt(sub, "map", "old_id<TAB>representative_id map", true);
        sub->callback([&, sub, f] {
            action = [&, sub, f] {
                const auto cfg = resolve(*f);
                const auto raw = load_corpus(val(sub, "in"));
                Corpus normalized;
                for (const auto& t : raw) {
                    normalized.add(normalize_table(t));
                }
                auto res = dedup_corpus(normalized, cfg.dedup_threshold);
                save_corpus(res.corpus, val(sub, "out"));
                save_id_map(res.mapping, val(sub, "map"));
                out << fmt::format("kept {} of {} tables ({} merges)\n", res.corpus.size(), raw.size(),
                                   res.merges.size());
                return 0;
            };
        });
    }
    {
        auto [sub, f] = subcommand("index-bm25", "Build the BM25 inverted index");
        path_opt(sub, "in", "tables.jsonl", true);
        path_opt(sub, "out", "index file", true);
        sub->callback([&, sub, f] {
            action = [&, sub, f] {
                const auto cfg = resolve(*f);
                const auto c = load_corpus(val(sub, "in"));
                const auto idx = build_index(c, cfg.bm25_boost, cfg.bm25_k1, cfg.bm25_b);
                save_bm25_index(idx, val(sub, "out"));
                out << fmt::format("indexed {} tables\n", idx.doc_count());
                return 0;
            };
        });
    }
    {
        auto [sub, f] = subcommand("retrieve", "Rank tables for each question with a BM25 or dense index");
        path_opt(sub, "index", "BM25 index or table embeddings", true);
        path_opt(sub, "checkpoint", "encoder checkpoint (dense index only)", false);
        path_opt(sub, "questions", "questions.jsonl", true);
        path_opt(sub, "out", "run file (TSV)", true);
        sub->callback([&, sub, f] {
            action = [&, sub, f] {
                const auto cfg = resolve(*f);
                const auto qs = load_questions(val(sub, "questions"));
                const auto k = static_cast<size_t>(cfg.top_k);
                const auto magic = file_magic(val(sub, "index"));
                RetrievalRun run;
                if (magic == kBm25Magic) {
                    const auto idx = load_bm25_index(val(sub, "index"));
                    std::vector<std::vector<ScoredTable>> lists(qs.size());
                    parallel_for(qs.size(), cfg.threads,
                                 [&](size_t i) { lists[i] = bm25_topk(idx, qs[i].question, k); });
                    run = RetrievalRun("bm25");
                    for (size_t i = 0; i < qs.size(); ++i) {
                        run.add({qs[i].question.question_id, std::move(lists[i])});
                    }
                } else if (magic == kEmbeddingMagic) {
                    if (val(sub, "checkpoint").empty()) {
                        throw Error("a dense index needs --checkpoint");
                    }
                    const auto p = load_checkpoint(val(sub, "checkpoint"));
                    const auto idx = load_embeddings(val(sub, "index"));
                    run = run_retrieval(idx, p, qs, k, cfg.threads);
                } else {
                    throw Error(fmt::format("{} is neither a BM25 index nor an embedding file", val(sub, "index")));
                }
                save_run(run, val(sub, "out"));
                out << fmt::format("retrieved top-{} for {} questions ({})\n", k, run.size(), run.tag());
                return 0;
            };
        });
    }
    {
        auto [sub, f] = subcommand("pretrain-pairs", "Generate inverse-cloze pre-training pairs from table text");
        path_opt(sub, "tables", "tables.jsonl", true);
        path_opt(sub, "out", "pairs.jsonl", true);
        sub->callback([&, sub, f] {
            action = [&, sub, f] {
                const auto cfg = resolve(*f);
                const auto c = load_corpus(val(sub, "tables"));
                const auto pairs = generate_ict_pairs(c, cfg.ict_per_table, cfg.seed);
                save_pairs(pairs, val(sub, "out"));
                out << fmt::format("wrote {} pairs from {} tables\n", pairs.size(), c.size());
                return 0;
            };
        });
    }
    {
        auto [sub, f] = subcommand("pretrain", "Pre-train the dual encoder on (text, table) pairs");
        path_opt(sub, "tables", "tables.jsonl", true);
        path_opt(sub, "pairs", "pairs.jsonl", true);
        path_opt(sub, "out", "encoder checkpoint", true);
        path_opt(sub, "init", "starting checkpoint (default: fresh encoder)", false);
        path_opt(sub, "dev-questions", "dev questions for early stopping", false);
        path_opt(sub, "dev-tables", "dev corpus (default: gold tables of the dev questions)", false);
        path_opt(sub, "log", "training log TSV (default: OUT.log.tsv)", false);
        sub->callback([&, sub, f] {
            action = [&, sub, f] {
                const auto cfg = resolve(*f);
                const auto c = load_corpus(val(sub, "tables"));
                std::vector<TrainExample> data;
                for (const auto& pr : load_pairs(val(sub, "pairs"))) {
                    data.push_back({pr.text, table_index(c, pr.table_id, "pair"), std::nullopt});
                }
                return train_encoder(cfg, c, data, val(sub, "init"), val(sub, "dev-questions"),
                                     val(sub, "dev-tables"), val(sub, "out"), val(sub, "log"), out, err);
            };
        });
    }
    {
        auto [sub, f] = subcommand("train", "Train the dual encoder on questions, optionally with hard negatives");
        path_opt(sub, "tables", "tables.jsonl", true);
        path_opt(sub, "questions", "training questions.jsonl", true);
        path_opt(sub, "out", "encoder checkpoint", true);
        path_opt(sub, "init", "starting checkpoint (default: fresh encoder)", false);
        path_opt(sub, "negatives", "mined hard negatives TSV", false);
        path_opt(sub, "dev-questions", "dev questions for early stopping", false);
        path_opt(sub, "dev-tables", "dev corpus (default: gold tables of the dev questions)", false);
        path_opt(sub, "log", "training log TSV (default: OUT.log.tsv)", false);
        sub->callback([&, sub, f] {
            action = [&, sub, f] {
                const auto cfg = resolve(*f);
                const auto c = load_corpus(val(sub, "tables"));
                size_t skipped = 0;
                const auto qs = with_gold(load_questions(val(sub, "questions")), &skipped);
                std::unordered_map<std::string, std::string> negs;
                if (!val(sub, "negatives").empty()) {
                    for (auto& [q, t] : load_negatives(val(sub, "negatives"))) {
                        negs.emplace(std::move(q), std::move(t));
                    }
                }
                std::vector<TrainExample> data;
                size_t with_negative = 0;
                for (const auto& q : qs) {
                    TrainExample ex{q.question.text, table_index(c, *q.gold_table_id, q.question.question_id),
                                    std::nullopt};
                    if (auto it = negs.find(q.question.question_id); it != negs.end()) {
                        ex.hard_negative = table_index(c, it->second, "negative of " + it->first);
                        ++with_negative;
                    }
                    data.push_back(std::move(ex));
                }
                if (skipped > 0) {
                    err << fmt::format("skipped {} questions without a gold table\n", skipped);
                }
                if (!negs.empty()) {
                    err << fmt::format("{} of {} examples carry a hard negative\n", with_negative, data.size());
                }
                return train_encoder(cfg, c, data, val(sub, "init"), val(sub, "dev-questions"),
                                     val(sub, "dev-tables"), val(sub, "out"), val(sub, "log"), out, err);
            };
        });
    }
    {
        auto [sub, f] = subcommand("encode-corpus", "Embed every table with the table tower");
        path_opt(sub, "checkpoint", "encoder checkpoint", true);
        path_opt(sub, "tables", "tables.jsonl", true);
        path_opt(sub, "out", "embedding file", true);
        sub->callback([&, sub, f] {
            action = [&, sub, f] {
                const auto cfg = resolve(*f);
                const auto p = load_checkpoint(val(sub, "checkpoint"));
                const auto c = load_corpus(val(sub, "tables"));
                const auto idx = encode_corpus(p, c, cfg.threads);
                save_embeddings(idx, val(sub, "out"));
                out << fmt::format("encoded {} tables (d={})\n", idx.size(), idx.dim());
                return 0;
            };
        });
    }
    {
        auto [sub, f] = subcommand("search", "Print the top tables for one query");
        path_opt(sub, "index", "embedding file", true);
        path_opt(sub, "checkpoint", "encoder checkpoint", true);
        path_opt(sub, "query", "query text", true);
        sub->callback([&, sub, f] {
            action = [&, sub, f] {
                const auto cfg = resolve(*f);
                const auto p = load_checkpoint(val(sub, "checkpoint"));
                const auto idx = load_embeddings(val(sub, "index"));
                const auto h = encode_text(p, val(sub, "query"));
                const auto hits = search(idx, h, static_cast<size_t>(cfg.top_k));
                for (size_t i = 0; i < hits.size(); ++i) {
                    out << fmt::format("{}\t{}\t{:.17g}\n", i + 1, hits[i].table_id, hits[i].score);
                }
                return 0;
            };
        });
    }
    {
        auto [sub, f] = subcommand("mine", "Mine one hard negative per question from a retrieval run");
        path_opt(sub, "run", "run file (TSV)", true);
        path_opt(sub, "questions", "questions.jsonl", true);
        path_opt(sub, "tables", "tables.jsonl", true);
        path_opt(sub, "out", "negatives TSV", true);
        sub->callback([&, sub, f] {
            action = [&, sub, f] {
                const auto cfg = resolve(*f);
                const auto run = load_run(val(sub, "run"));
                const auto qs = with_gold(load_questions(val(sub, "questions")));
                const auto c = load_corpus(val(sub, "tables"));
                const auto res = mine_hard_negatives(run, qs, c, static_cast<size_t>(cfg.mine_depth), cfg.threads);
                save_negatives(res.triples, val(sub, "out"));
                out << fmt::format("mined {} negatives; {} questions missing from the run, {} without a survivor\n",
                                   res.triples.size(), res.missing_from_run.size(), res.no_survivor);
                return 0;
            };
        });
    }
    {
        auto [sub, f] = subcommand("train-reader", "Train the span reader on retrieved candidates");
        path_opt(sub, "tables", "tables.jsonl", true);
        path_opt(sub, "questions", "training questions.jsonl", true);
        path_opt(sub, "run", "run file over the training questions", true);
        path_opt(sub, "out", "reader checkpoint", true);
        path_opt(sub, "init", "starting reader checkpoint", false);
        path_opt(sub, "log", "training log TSV (default: OUT.log.tsv)", false);
        sub->callback([&, sub, f] {
            action = [&, sub, f] {
                const auto cfg = resolve(*f);
                const auto c = load_corpus(val(sub, "tables"));
                const auto qs = with_gold(load_questions(val(sub, "questions")));
                const auto run = load_run(val(sub, "run"));
                auto rp = val(sub, "init").empty() ? make_reader(ReaderOptions::from_config(cfg))
                                                   : load_reader(val(sub, "init"));
                const auto data = build_reader_data(run, qs, c, static_cast<size_t>(cfg.top_k), rp.max_answer_len,
                                                    rp.include_header);
                err << fmt::format("{} reader examples; skipped {} without a matching span, {} without gold\n",
                                   data.examples.size(), data.skipped_no_span, data.skipped_no_gold);
                auto res = train_reader(std::move(rp), data.examples, ReaderTrainOptions::from_config(cfg));
                save_reader(res.params, val(sub, "out"));
                const auto log_path = val(sub, "log").empty() ? val(sub, "out") + ".log.tsv" : val(sub, "log");
                std::ofstream log(log_path, std::ios::binary | std::ios::trunc);
                if (!log) {
                    throw Error(fmt::format("cannot write {}", log_path));
                }
                log << "step\tloss\tspan_loss\tcandidate_loss\n";
                for (size_t i = 0; i < res.log.size(); ++i) {
                    log << fmt::format("{}\t{:.17g}\t{:.17g}\t{:.17g}\n", i + 1, res.log[i].total, res.log[i].span,
                                       res.log[i].candidate);
                }
                out << fmt::format("trained reader for {} steps\n", res.log.size());
                return 0;
            };
        });
    }
    {
        auto [sub, f] = subcommand("answer", "Extract an answer span from the top retrieved tables");
        path_opt(sub, "reader", "reader checkpoint", true);
        path_opt(sub, "questions", "questions.jsonl", true);
        path_opt(sub, "run", "run file (TSV)", true);
        path_opt(sub, "tables", "tables.jsonl", true);
        path_opt(sub, "out", "predictions.jsonl", true);
        sub->callback([&, sub, f] {
            action = [&, sub, f] {
                const auto cfg = resolve(*f);
                const auto rp = load_reader(val(sub, "reader"));
                const auto qs = load_questions(val(sub, "questions"));
                const auto run = load_run(val(sub, "run"));
                const auto c = load_corpus(val(sub, "tables"));
                const auto preds = answer_questions(rp, run, qs, c, static_cast<size_t>(cfg.top_k), cfg.threads);
                save_predictions(preds, val(sub, "out"));
                out << fmt::format("answered {} of {} questions\n", preds.size(), qs.size());
                return 0;
            };
        });
    }
    std::vector<size_t> eval_ks{1, 10, 50};
    {
        auto [sub, f] = subcommand("eval-retrieval", "Recall@K of a run against gold tables", false);
        path_opt(sub, "run", "run file (TSV)", true);
        path_opt(sub, "questions", "questions.jsonl", true);
        path_opt(sub, "map", "id map from dedup, applied to both sides", false);
        path_opt(sub, "out", "report JSON (default: stdout)", false);
        sub->add_option("--k", eval_ks, "comma separated depths")->delimiter(',')->capture_default_str();
        sub->callback([&, sub, f] {
            action = [&, sub, f] {
                resolve(*f);
                const auto run = load_run(val(sub, "run"));
                size_t skipped = 0;
                const auto qs = with_gold(load_questions(val(sub, "questions")), &skipped);
                IdMap idmap;
                if (!val(sub, "map").empty()) {
                    idmap = load_id_map(val(sub, "map"));
                }
                auto report = retrieval_report(run, qs, eval_ks, val(sub, "map").empty() ? nullptr : &idmap);
                report.num_skipped = skipped;
                write_text(val(sub, "out"), report.to_json(), out);
                return 0;
            };
        });
    }
    {
        auto [sub, f] = subcommand("eval-qa", "Exact match, token F1 and their oracle forms");
        path_opt(sub, "pred", "predictions.jsonl", true);
        path_opt(sub, "questions", "questions.jsonl", true);
        path_opt(sub, "out", "report JSON (default: stdout)", false);
        sub->callback([&, sub, f] {
            action = [&, sub, f] {
                resolve(*f);
                const auto preds = load_predictions(val(sub, "pred"));
                const auto qs = load_questions(val(sub, "questions"));
                write_text(val(sub, "out"), qa_report(preds, qs).to_json(), out);
                return 0;
            };
        });
    }
    std::string sig_metric = "em";
    {
        auto [sub, f] = subcommand("significance", "McNemar test between two prediction files");
        path_opt(sub, "pred-a", "predictions of system A", true);
        path_opt(sub, "pred-b", "predictions of system B", true);
        path_opt(sub, "questions", "questions.jsonl with gold answers", true);
        path_opt(sub, "out", "report JSON (default: stdout)", false);
        sub->add_option("--metric", sig_metric, "per-question correctness")
            ->check(CLI::IsMember({"em", "oracle_em"}))
            ->capture_default_str();
        sub->callback([&, sub, f] {
            action = [&, sub, f] {
                resolve(*f);
                const auto qs = load_questions(val(sub, "questions"));
                auto correctness = [&](const std::string& path) {
                    std::unordered_map<std::string, Prediction> by_id;
                    for (auto& p : load_predictions(path)) {
                        by_id.emplace(p.question_id, std::move(p));
                    }
                    std::vector<int> right;
                    for (const auto& q : qs) {
                        if (q.answers.empty()) {
                            continue;
                        }
                        auto it = by_id.find(q.question.question_id);
                        int ok = 0;
                        if (it != by_id.end()) {
                            ok = em_f1(it->second.answer, q.answers).em;
                            if (sig_metric == "oracle_em") {
                                for (const auto& cand : it->second.candidate_answers) {
                                    ok = std::max(ok, em_f1(cand.answer, q.answers).em);
                                }
                            }
                        }
                        right.push_back(ok);
                    }
                    return right;
                };
                const auto a = correctness(val(sub, "pred-a"));
                const auto b = correctness(val(sub, "pred-b"));
                const auto r = mcnemar(a, b);
                nlohmann::ordered_json j;
                j["metric"] = sig_metric;
                j["num_questions"] = a.size();
                j["a_right_b_wrong"] = r.b;
                j["a_wrong_b_right"] = r.c;
                j["statistic"] = r.statistic;
                j["p_value"] = r.p_value;
                write_text(val(sub, "out"), j.dump(2), out);
                return 0;
            };
        });
    }
    {
        auto [sub, f] = subcommand("recipe", "Run a named experiment pipeline with an input check and manifest");
        auto* name = path_opt(sub, "name", "recipe name", false);
        path_opt(sub, "workdir", "directory for all stage outputs", false);
        path_opt(sub, "tables", "tables.jsonl", false);
        path_opt(sub, "dev-tables", "dev corpus for early stopping", false);
        path_opt(sub, "train-questions", "training questions", false);
        path_opt(sub, "dev-questions", "dev questions", false);
        path_opt(sub, "test-questions", "evaluation questions", false);
        auto* list = sub->add_flag("--list", "print recipe names and exit");
        name->excludes(list);
        sub->callback([&, sub, f, list] {
            action = [&, sub, f, list] {
                if (list->count() > 0) {
                    for (const auto& n : recipe_names()) {
                        out << n << '\n';
                    }
                    return 0;
                }
                if (val(sub, "name").empty() || val(sub, "workdir").empty()) {
                    throw Error("recipe needs --name and --workdir");
                }
                const auto cfg = resolve(*f);
                RecipeInputs in{val(sub, "workdir"),       val(sub, "tables"),        val(sub, "dev-tables"),
                                val(sub, "train-questions"), val(sub, "dev-questions"), val(sub, "test-questions")};
                const auto recipe = make_recipe(val(sub, "name"), in, cfg, given_flags(*f));
                check_recipe_inputs(recipe);
                fs::create_directories(in.workdir);
                return run_recipe(recipe, in.workdir / "manifest.jsonl", out, err);
            };
        });
    }
    {
        auto [sub, f] = subcommand("selfcheck", "Run the built-in invariant suite on generated fixtures");
        path_opt(sub, "scratch", "directory for temporary files", false);
        sub->callback([&, sub, f] {
            action = [&, sub, f] {
                const auto cfg = resolve(*f);
                fs::path scratch = val(sub, "scratch");
                const bool own = scratch.empty();
                if (own) {
                    scratch = fs::temp_directory_path() / fmt::format("tqa-selfcheck-{}", ::getpid());
                }
                fs::create_directories(scratch);
                const auto results = selfcheck(cfg.seed, scratch);
                if (own) {
                    fs::remove_all(scratch);
                }
                size_t failed = 0;
                for (const auto& r : results) {
                    out << (r.passed ? "PASS " : "FAIL ") << r.name;
                    if (!r.detail.empty()) {
                        out << ": " << r.detail;
                    }
                    out << '\n';
                    failed += r.passed ? 0 : 1;
                }
                out << fmt::format("{} of {} checks passed\n", results.size() - failed, results.size());
                return failed == 0 ? 0 : 1;
            };
        });
    }
    std::string synth_kind = "key";
    uint64_t synth_seed = 0;
    {
        auto [sub, f] = subcommand("synth", "Write a generated corpus with train, dev and test questions");
        path_opt(sub, "out", "output directory", true);
        sub->add_option("--kind", synth_kind, "key or near_duplicate")
            ->check(CLI::IsMember({"key", "near_duplicate"}))
            ->capture_default_str();
        auto* seed_opt = sub->add_option("--data-seed", synth_seed, "generator seed (default: the generator's own)");
        sub->callback([&, sub, f, seed_opt] {
            action = [&, sub, f, seed_opt] {
                resolve(*f);
                SyntheticSet set;
                if (synth_kind == "key") {
                    KeySetOptions o;
                    if (seed_opt->count() > 0) {
                        o.seed = synth_seed;
                    }
                    set = make_key_set(o);
                } else {
                    NearDuplicateSetOptions o;
                    if (seed_opt->count() > 0) {
                        o.seed = synth_seed;
                    }
                    set = make_near_duplicate_set(o);
                }
                const fs::path dir = val(sub, "out");
                fs::create_directories(dir);
                save_corpus(set.tables, dir / "tables.jsonl");
                save_corpus(set.dev_tables, dir / "dev_tables.jsonl");
                save_questions(set.train, dir / "train.jsonl");
                save_questions(set.dev, dir / "dev.jsonl");
                save_questions(set.test, dir / "test.jsonl");
                out << fmt::format("wrote {} tables and {}/{}/{} questions to {}\n", set.tables.size(),
                                   set.train.size(), set.dev.size(), set.test.size(), dir.string());
                return 0;
            };
        });
    }

    std::vector<std::string> argv_store{"tqa"};
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& a : argv_store) {
        argv.push_back(a.data());
    }
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err);
    }
    try {
        return action ? action() : 0;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace tqa::cli
