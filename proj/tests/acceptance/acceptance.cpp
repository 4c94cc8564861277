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

// End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
// `--only N` runs a single criterion (one ctest entry per criterion).

#include <fmt/format.h>
#include <unistd.h>

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "cli.h"
#include "tqa/dedup.h"
#include "tqa/index.h"
#include "tqa/metrics.h"
#include "tqa/miner.h"
#include "tqa/reader.h"
#include "tqa/synthetic.h"
#include "tqa/training.h"

using namespace tqa;
namespace fs = std::filesystem;

namespace {

struct Verdict {
    bool passed = false;
    std::string detail;
};

struct Criterion {
    int number;
    std::string name;
    double budget_s;
    std::function<Verdict(const fs::path&)> run;
};

Matrix
random_matrix(Rng& rng, size_t n, double scale) {
    Matrix m(n, n);
    for (auto& v : m.data) {
        v = rng.uniform(-scale, scale);
    }
    return m;
}

double
relative_error(double a, double b) {
    return std::abs(a - b) / std::max(1e-6, std::abs(a) + std::abs(b));
}

std::string
slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

Table
table(std::string id, std::string page, std::string version, std::vector<std::string> header,
      std::vector<std::vector<std::string>> rows) {
    Table t;
    t.table_id = std::move(id);
    t.page_title = std::move(page);
    t.page_version = std::move(version);
    t.header = std::move(header);
    t.rows = std::move(rows);
    return t;
}

std::string
repeat(const std::string& w, int n) {
    std::string out;
    for (int i = 0; i < n; ++i) {
        out += (i ? " " : "") + w;
    }
    return out;
}

// ---------------------------------------------------------------------------

Verdict
loss_oracle(const fs::path&) {
    double worst = 0.0;
    for (size_t B : {2u, 4u, 8u, 16u}) {
        const double ib = in_batch_loss({Matrix(B, B), std::nullopt}).loss;
        const double hn = hard_negative_loss({Matrix(B, B), Matrix(B, B)}).loss;
        worst = std::max({worst, std::abs(ib - std::log(double(B))), std::abs(hn - std::log(2.0 * double(B)))});
    }
    return {worst < 1e-9, fmt::format("max deviation {:.2e}", worst)};
}

Verdict
gradient_fidelity(const fs::path&) {
    Corpus c;
    const std::vector<std::string> words{"river", "gold", "album", "city", "year", "club", "north", "blue"};
    Rng rng(5);
    for (int i = 0; i < 8; ++i) {
        std::vector<std::vector<std::string>> rows;
        for (int r = 0; r < 3; ++r) {
            rows.push_back({words[rng.below(8)] + " " + words[rng.below(8)], words[rng.below(8)]});
        }
        c.add(table(fmt::format("t{}", i), fmt::format("{} page {}", words[size_t(i)], i), "v1", {"name", "note"}, rows));
    }
    EncoderOptions opt;
    opt.d = 8;
    opt.feature_dims = 4096;
    opt.init_scale = 0.3;
    opt.seed = 11;
    auto p = make_encoder(opt);
    for (auto* b : {&p.question_tower.bias, &p.table_tower.bias}) {
        for (auto& v : *b) {
            v = rng.uniform(-0.2, 0.2);
        }
    }
    const std::vector<TrainExample> batch{{"river page gold", 0, 4}, {"gold album", 1, 5}, {"album city year", 2, 6},
                                          {"city north", 3, 7}};
    double worst = 0.0;
    size_t checked = 0;
    for (bool hard : {false, true}) {
        const auto fb = featurize_batch(p, c, batch, hard);
        EncoderGrads g;
        loss_and_gradients(p, fb, &g);
        auto probe = [&](double analytic, double& param) {
            const double h = 1e-3, saved = param;
            param = saved + h;
            const double up = loss_and_gradients(p, fb, nullptr);
            param = saved - h;
            const double down = loss_and_gradients(p, fb, nullptr);
            param = saved;
            worst = std::max(worst, relative_error(analytic, (up - down) / (2 * h)));
            ++checked;
        };
        for (auto [tower, grads] : {std::pair{&p.question_tower, &g.question_weights},
                                    std::pair{&p.table_tower, &g.table_weights}}) {
            for (const auto& [col, values] : *grads) {
                for (size_t k = 0; k < values.size(); ++k) {
                    probe(values[k], tower->weights.materialize(col)[k]);
                }
            }
        }
        for (size_t k = 0; k < size_t(opt.d); ++k) {
            probe(g.question_bias[k], p.question_tower.bias[k]);
            probe(g.table_bias[k], p.table_tower.bias[k]);
        }
    }
    return {worst < 1e-4, fmt::format("{} parameters, max relative error {:.2e}", checked, worst)};
}

Verdict
masked_hard_negatives(const fs::path&) {
    Rng rng(3);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const size_t B = 2 + rng.below(15);
        const auto S = random_matrix(rng, B, 20.0);
        const double ib = in_batch_loss({S, std::nullopt}).loss;
        const double hn = hard_negative_loss({S, Matrix(B, B, kMaskedLogit)}).loss;
        worst = std::max(worst, std::abs(ib - hn));
    }
    return {worst < 1e-6, fmt::format("100 matrices, max |difference| {:.2e}", worst)};
}

Verdict
mips_exactness(const fs::path&) {
    Rng rng(4);
    const size_t d = 256;
    EmbeddingIndex idx(d);
    for (size_t i = 0; i < 1000; ++i) {
        std::vector<double> v(d);
        for (auto& x : v) {
            x = rng.uniform(-1, 1);
        }
        idx.add(fmt::format("t{:04}", i), v);
    }
    size_t mismatches = 0;
    for (int q = 0; q < 100; ++q) {
        std::vector<double> h(d);
        for (auto& x : h) {
            x = rng.uniform(-1, 1);
        }
        std::vector<std::pair<double, std::string>> all;
        for (size_t i = 0; i < idx.size(); ++i) {
            double s = 0.0;
            const auto v = idx.vector(i);
            for (size_t k = 0; k < d; ++k) {
                s += h[k] * double(v[k]);
            }
            all.emplace_back(-s, idx.ids()[i]);
        }
        std::sort(all.begin(), all.end());
        for (size_t k : {1u, 10u, 50u}) {
            const auto got = search(idx, h, k);
            if (got.size() != k) {
                ++mismatches;
                continue;
            }
            for (size_t i = 0; i < k; ++i) {
                if (got[i].table_id != all[i].second || relative_error(got[i].score, -all[i].first) > 1e-12) {
                    ++mismatches;
                    break;
                }
            }
        }
    }
    return {mismatches == 0, fmt::format("300 rankings compared, {} mismatches", mismatches)};
}

// Single-column tables built from token counts; the header word is shared.
std::vector<Table>
dedup_fixture() {
    return {
        // identical tables on two versions
        table("a1", "Page One", "v1", {"h"}, {{"alpha beta gamma"}, {"delta"}}),
        table("a2", "Page One", "v2", {"h"}, {{"alpha beta gamma"}, {"delta"}}),
        // counts {h:1, p:9, q:3} against {h:1, p:9, r:3}: similarity 0.90
        table("b1", "Page One", "v1", {"h"}, {{repeat("p", 9)}, {repeat("q", 3)}}),
        table("b2", "Page One", "v2", {"h"}, {{repeat("p", 9)}, {repeat("r", 3)}}),
        // similarity 0.99 but the same page version
        table("c1", "Page Two", "v1", {"h"}, {{repeat("c", 10)}, {"d"}}),
        table("c2", "Page Two", "v1", {"h"}, {{repeat("c", 10)}, {"e"}}),
        // similarity 0.96 with row counts 1 and 4
        table("d1", "Page Two", "v1", {"h"}, {{repeat("x", 10)}}),
        table("d2", "Page Two", "v2", {"h"}, {{repeat("x", 10)}, {"y"}, {"y"}, {"y"}}),
        // a chain: e1~e2 and e2~e3 pass, e1~e3 does not
        table("e1", "Page Three", "v1", {"h"}, {{repeat("m", 9)}, {repeat("n", 4)}}),
        table("e2", "Page Three", "v2", {"h"}, {{repeat("m", 9)}, {repeat("n", 4)}, {repeat("o", 4)}}),
        table("e3", "Page Three", "v3", {"h"}, {{repeat("m", 9)}, {repeat("o", 4)}}),
        table("f1", "Page Three", "v4", {"h"}, {{"unrelated words here"}}),
    };
}

double
count_cosine(const Table& a, const Table& b) {
    auto counts = [](const Table& t) {
        std::map<std::string, double> m;
        for (const auto& tok : tokenize_words(fmt::format("{}", fmt::join(t.header, " ")))) {
            m[tok] += 1;
        }
        for (const auto& row : t.rows) {
            for (const auto& cell : row) {
                for (const auto& tok : tokenize_words(cell)) {
                    m[tok] += 1;
                }
            }
        }
        return m;
    };
    const auto ca = counts(a), cb = counts(b);
    double dot = 0, na = 0, nb = 0;
    for (const auto& [k, v] : ca) {
        na += v * v;
        if (auto it = cb.find(k); it != cb.end()) {
            dot += v * it->second;
        }
    }
    for (const auto& [k, v] : cb) {
        nb += v * v;
    }
    return dot / std::sqrt(na * nb);
}

Verdict
dedup_fidelity(const fs::path&) {
    const auto fixture = dedup_fixture();
    // Reference clusters: connected components of the pairs meeting all four rules.
    std::map<std::string, std::string> parent;
    for (const auto& t : fixture) {
        parent[t.table_id] = t.table_id;
    }
    std::function<std::string(const std::string&)> root = [&](const std::string& x) {
        return parent[x] == x ? x : root(parent[x]);
    };
    size_t eligible_pairs = 0;
    for (size_t i = 0; i < fixture.size(); ++i) {
        for (size_t j = i + 1; j < fixture.size(); ++j) {
            const auto &a = fixture[i], &b = fixture[j];
            const bool ok = a.page_title == b.page_title && count_cosine(a, b) > 0.91 &&
                            a.page_version != b.page_version &&
                            std::abs(long(a.rows.size()) - long(b.rows.size())) <= 2 &&
                            a.header.size() == b.header.size();
            if (ok) {
                ++eligible_pairs;
                const auto ra = root(a.table_id), rb = root(b.table_id);
                parent[std::max(ra, rb)] = std::min(ra, rb);
            }
        }
    }
    std::map<std::string, std::set<std::string>> reference;
    for (const auto& t : fixture) {
        reference[root(t.table_id)].insert(t.table_id);
    }
    const std::set<std::set<std::string>> expected{{"a1", "a2"}, {"b1"}, {"b2"}, {"c1"}, {"c2"}, {"d1"}, {"d2"},
                                                   {"e1", "e2", "e3"}, {"f1"}};
    std::set<std::set<std::string>> reference_sets;
    for (auto& [r, members] : reference) {
        reference_sets.insert(members);
    }
    if (reference_sets != expected) {
        return {false, "fixture does not realize the intended pair types"};
    }
    const double b_sim = count_cosine(fixture[2], fixture[3]);
    const double c_sim = count_cosine(fixture[4], fixture[5]);

    Rng rng(9);
    std::optional<std::set<std::set<std::string>>> first;
    for (int run = 0; run < 10; ++run) {
        auto shuffled = fixture;
        for (size_t i = shuffled.size(); i > 1; --i) {
            std::swap(shuffled[i - 1], shuffled[rng.below(i)]);
        }
        const auto result = dedup_corpus(Corpus(shuffled));
        std::set<std::set<std::string>> got;
        for (const auto& cl : result.clusters) {
            got.insert(cl.member_ids);
        }
        if (got != expected) {
            return {false, fmt::format("run {} produced {} clusters", run, got.size())};
        }
        if (first && *first != got) {
            return {false, "clusters changed between runs"};
        }
        first = got;
    }
    return {true, fmt::format("{} eligible pairs, 9 clusters in all 10 runs (near pair {:.3f}, same-version pair {:.3f})",
                              eligible_pairs, b_sim, c_sim)};
}

std::vector<TrainExample>
examples_of(const Corpus& c, std::span<const QAExample> qs) {
    std::vector<TrainExample> out;
    for (const auto& q : qs) {
        out.push_back({q.question.text, *c.index_of(*q.gold_table_id), std::nullopt});
    }
    return out;
}

std::vector<TrainExample>
ict_examples(const Corpus& c, uint64_t seed) {
    std::vector<TrainExample> out;
    for (const auto& pr : generate_ict_pairs(c, 1, seed)) {
        out.push_back({pr.text, *c.index_of(pr.table_id), std::nullopt});
    }
    return out;
}

std::pair<double, double>
recall_1_10(const EncoderParams& p, const Corpus& corpus, std::span<const QAExample> qs) {
    const auto idx = encode_corpus(p, corpus, 4);
    const auto run = run_retrieval(idx, p, qs, 10, 4);
    return {recall_at_k(run, qs, 1), recall_at_k(run, qs, 10)};
}

Verdict
synthetic_retrieval(const fs::path&) {
    const auto set = make_key_set({});
    const Config cfg;
    const auto enc = EncoderOptions::from_config(cfg);
    const auto opt = TrainOptions::from_config(cfg);
    const DevSet dev{set.dev_tables, set.dev};
    const auto random_init = make_encoder(enc);
    const auto ict = ict_examples(set.tables, cfg.seed);
    const auto pre = train(TrainState(random_init), set.tables, ict, &dev, opt);
    const auto ft = train(TrainState(pre.state.params), set.tables, examples_of(set.tables, set.train), &dev, opt);
    const auto [r1, r10] = recall_1_10(ft.state.params, set.tables, set.test);
    const auto [u1, u10] = recall_1_10(random_init, set.tables, set.test);
    const bool ok = r10 >= 0.95 && r1 >= 0.80 && u10 <= 0.30;
    return {ok, fmt::format("{} ICT pairs; trained recall@1 {:.3f} recall@10 {:.3f}; untrained recall@10 {:.3f}",
                            ict.size(), r1, r10, u10)};
}

Verdict
hard_negative_benefit(const fs::path&) {
    const auto set = make_near_duplicate_set({});
    const Config cfg;
    // Test questions are ranked against their own gold tables and duplicates.
    Corpus test_corpus;
    for (const auto& q : set.test) {
        auto dup = *q.gold_table_id;
        dup.back() = 'b';
        test_corpus.add(*set.tables.find(*q.gold_table_id));
        test_corpus.add(*set.tables.find(dup));
    }
    const DevSet dev{set.dev_tables, set.dev};
    double sum_plain = 0, sum_hn = 0;
    int improved = 0;
    std::string detail;
    for (uint64_t seed : {1u, 2u, 3u}) {
        auto enc = EncoderOptions::from_config(cfg);
        enc.seed = seed;
        auto opt = TrainOptions::from_config(cfg);
        opt.seed = seed;
        opt.threads = 4;
        const auto pre = train(TrainState(make_encoder(enc)), set.tables, ict_examples(set.tables, seed), &dev, opt);
        const auto plain_data = examples_of(set.tables, set.train);
        const auto plain = train(TrainState(pre.state.params), set.tables, plain_data, &dev, opt);

        const auto idx = encode_corpus(plain.state.params, set.tables, 4);
        const auto run = run_retrieval(idx, plain.state.params, set.train, size_t(cfg.mine_depth), 4);
        const auto mined = mine_hard_negatives(run, set.train, set.tables, size_t(cfg.mine_depth), 4);
        std::map<std::string, std::string> negative;
        for (const auto& t : mined.triples) {
            negative[t.question_id] = t.hard_negative_table_id;
        }
        auto hn_data = plain_data;
        for (size_t i = 0; i < set.train.size(); ++i) {
            if (auto it = negative.find(set.train[i].question.question_id); it != negative.end()) {
                hn_data[i].hard_negative = *set.tables.index_of(it->second);
            }
        }
        const auto hn = train(TrainState(pre.state.params), set.tables, hn_data, &dev, opt);

        const double a = recall_1_10(plain.state.params, test_corpus, set.test).first;
        const double b = recall_1_10(hn.state.params, test_corpus, set.test).first;
        sum_plain += a;
        sum_hn += b;
        improved += b >= a + 0.05 ? 1 : 0;
        detail += fmt::format("seed {}: {:.3f} -> {:.3f}; ", seed, a, b);
    }
    const double mean_plain = sum_plain / 3, mean_hn = sum_hn / 3;
    const bool non_degrading = mean_hn >= mean_plain - 0.02;
    const bool ok = non_degrading && improved >= 2;
    detail += fmt::format("mean {:.3f} -> {:.3f}; non-degradation {}, +0.05 on {} of 3 seeds", mean_plain, mean_hn,
                          non_degrading ? "met" : "missed", improved);
    return {ok, detail};
}

// Solves the 3x3 system g x = y by Gaussian elimination with pivoting.
std::array<double, 3>
solve3(std::array<std::array<double, 3>, 3> g, std::array<double, 3> y) {
    for (size_t col = 0; col < 3; ++col) {
        size_t pivot = col;
        for (size_t r = col + 1; r < 3; ++r) {
            if (std::abs(g[r][col]) > std::abs(g[pivot][col])) {
                pivot = r;
            }
        }
        std::swap(g[col], g[pivot]);
        std::swap(y[col], y[pivot]);
        for (size_t r = col + 1; r < 3; ++r) {
            const double f = g[r][col] / g[col][col];
            for (size_t k = col; k < 3; ++k) {
                g[r][k] -= f * g[col][k];
            }
            y[r] -= f * y[col];
        }
    }
    std::array<double, 3> x{};
    for (size_t i = 3; i-- > 0;) {
        double s = y[i];
        for (size_t k = i + 1; k < 3; ++k) {
            s -= g[i][k] * x[k];
        }
        x[i] = s / g[i][i];
    }
    return x;
}

Verdict
reader_correctness(const fs::path&) {
    Rng rng(8);
    size_t tables_checked = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const size_t cols = 1 + rng.below(4);
        const size_t cap = 1 + rng.below(12);
        auto cell = [&] {
            std::string s;
            for (size_t k = 0, n = rng.below(16); k < n; ++k) {
                s += fmt::format("w{}{}", rng.below(20), rng.below(3) ? " " : "; ");
            }
            return s;
        };
        Table t = table("t", "some title words", "v1", {}, {});
        for (size_t c = 0; c < cols; ++c) {
            t.header.push_back(cell());
        }
        for (size_t r = 0, n = rng.below(5); r < n; ++r) {
            std::vector<std::string> row;
            for (size_t c = 0; c < cols; ++c) {
                row.push_back(cell());
            }
            t.rows.push_back(row);
        }
        size_t expected = 0;
        auto add = [&](const std::string& text) {
            const size_t n = tokenize_words(text).size();
            expected += n <= cap ? n * (n + 1) / 2 : cap * n - cap * (cap - 1) / 2;
        };
        for (const auto& h : t.header) {
            add(h);
        }
        for (const auto& row : t.rows) {
            for (const auto& c : row) {
                add(c);
            }
        }
        if (enumerate_spans(t, int(cap)).size() != expected) {
            return {false, fmt::format("span count mismatch on random table {}", trial)};
        }
        ++tables_checked;
    }

    ReaderOptions ro;
    ro.r = 6;
    ro.hidden = 5;
    ro.feature_dims = 4096;
    ro.seed = 21;
    auto rp = make_reader(ro);
    for (auto& v : rp.dense) {
        v = rng.uniform(-1, 1);
    }
    const Question q{"q", "which one is it"};
    const std::array<Table, 3> cands{table("x", "first page", "v1", {"name"}, {{"amber"}, {"cobalt"}}),
                                     table("y", "second page", "v1", {"name"}, {{"violet ochre"}}),
                                     table("z", "third page", "v1", {"label"}, {{"sienna"}, {"teal"}})};
    // Choose the candidate scorer so the three logits are exactly 0.5, 2.0 and 1.0.
    std::array<std::vector<double>, 3> means;
    for (size_t i = 0; i < 3; ++i) {
        const auto enc = encode_for_reader(rp, q.text, cands[i]);
        means[i].assign(size_t(ro.r), 0.0);
        for (const auto& rep : enc.reps) {
            for (size_t k = 0; k < means[i].size(); ++k) {
                means[i][k] += rep[k] / double(enc.reps.size());
            }
        }
    }
    std::array<std::array<double, 3>, 3> gram{};
    for (size_t i = 0; i < 3; ++i) {
        for (size_t j = 0; j < 3; ++j) {
            for (size_t k = 0; k < size_t(ro.r); ++k) {
                gram[i][j] += means[i][k] * means[j][k];
            }
        }
    }
    const auto coef = solve3(gram, {0.5, 2.0, 1.0});
    for (size_t k = 0; k < size_t(ro.r); ++k) {
        rp.dense[rp.wc_offset() + k] = coef[0] * means[0][k] + coef[1] * means[1][k] + coef[2] * means[2][k];
    }
    rp.dense[rp.bc_offset()] = 0.0;
    for (size_t i = 0; i < 3; ++i) {
        const double want = std::array{0.5, 2.0, 1.0}[i];
        if (std::abs(score_candidate(rp, q, cands[i]) - want) > 1e-9) {
            return {false, "could not set the candidate logits"};
        }
    }
    const auto spans = enumerate_spans(cands[1], rp.max_answer_len);
    const auto scores = score_spans(rp, q, cands[1], spans);
    const auto best = spans[size_t(std::max_element(scores.begin(), scores.end()) - scores.begin())].text;
    std::vector<const Table*> order{&cands[0], &cands[1], &cands[2]};
    for (int perm = 0; perm < 6; ++perm) {
        const auto a = answer(rp, q, order);
        if (a.status != AnswerStatus::kOk || a.table_id != "y" || a.text != best) {
            return {false, fmt::format("answer() returned {} '{}'", a.table_id, a.text)};
        }
        std::next_permutation(order.begin(), order.end());
    }
    return {true, fmt::format("{} random tables; answer '{}' from the logit-2.0 candidate in all 6 orders",
                              tables_checked, best)};
}

Verdict
metrics_checks(const fs::path&) {
    const auto ef = em_f1("red album", std::vector<std::string>{"the red album blues"});
    if (ef.em != 0 || std::abs(ef.f1 - 0.8) > 1e-12) {
        return {false, fmt::format("em_f1 gave ({}, {})", ef.em, ef.f1)};
    }
    Rng rng(6);
    for (int trial = 0; trial < 50; ++trial) {
        RetrievalRun run;
        std::vector<QAExample> ex;
        for (int q = 0; q < 20; ++q) {
            const auto qid = fmt::format("q{}", q);
            ex.push_back({{qid, "?"}, fmt::format("t{}", rng.below(60)), {}});
            RankedList list{qid, {}};
            std::vector<size_t> ids(60);
            std::iota(ids.begin(), ids.end(), size_t{0});
            for (size_t i = ids.size(); i > 1; --i) {
                std::swap(ids[i - 1], ids[rng.below(i)]);
            }
            for (size_t r = 0; r < 60; ++r) {
                list.ranked.push_back({fmt::format("t{}", ids[r]), -double(r)});
            }
            run.add(list);
        }
        double prev = 0.0;
        for (size_t k = 1; k <= 60; ++k) {
            const double r = recall_at_k(run, ex, k);
            if (r < prev) {
                return {false, fmt::format("recall fell from {} to {} at k={}", prev, r, k)};
            }
            prev = r;
        }
    }
    const std::vector<std::string> words{"red", "album", "the", "blue", "sky", "1999"};
    auto phrase = [&] {
        std::string s;
        for (size_t k = 0, n = rng.below(4); k < n; ++k) {
            s += words[rng.below(words.size())] + " ";
        }
        return s;
    };
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<QAExample> ex;
        std::vector<Prediction> preds;
        for (int q = 0; q < 20; ++q) {
            const auto qid = fmt::format("q{}", q);
            ex.push_back({{qid, "?"}, "t", {phrase() + "x"}});
            Prediction p{qid, "t", phrase(), 1.0, {}};
            for (size_t c = 0, n = rng.below(5); c < n; ++c) {
                p.candidate_answers.push_back({fmt::format("c{}", c), phrase(), 0.0});
            }
            preds.push_back(p);
        }
        const auto rep = qa_report(preds, ex);
        if (rep.at("oracle_em") < rep.at("em") || rep.at("oracle_f1") < rep.at("f1")) {
            return {false, "oracle metric below the selected metric"};
        }
    }
    std::vector<int> a(20, 0), b(20, 0);
    std::fill(a.begin(), a.begin() + 5, 1);
    std::fill(b.begin() + 5, b.end(), 1);
    const auto mc = mcnemar(a, b);
    const bool ok = std::abs(mc.p_value - 0.044) <= 0.002;
    return {ok, fmt::format("em_f1 (0, 0.8); 50 monotone runs; 50 oracle sets; McNemar 5/15 p={:.5f}", mc.p_value)};
}

Verdict
recipe_determinism(const fs::path& scratch) {
    const auto data = scratch / "data";
    std::ostringstream sink;
    if (cli::run({"synth", "--out", data.string(), "--kind", "key"}, sink, sink) != 0) {
        return {false, "synth failed: " + sink.str()};
    }
    const std::vector<std::string> outputs{"run.test.tsv", "report.json", "run.train.tsv", "negatives.tsv",
                                           "dtr_hn.ckpt", "dtr.ckpt"};
    std::array<std::map<std::string, std::string>, 2> contents;
    for (int round = 0; round < 2; ++round) {
        const auto work = scratch / fmt::format("run{}", round);
        std::ostringstream out, err;
        const int status = cli::run({"recipe", "--name", "dtr_plus_hn", "--workdir", work.string(), "--tables",
                                     (data / "tables.jsonl").string(), "--dev-tables",
                                     (data / "dev_tables.jsonl").string(), "--train-questions",
                                     (data / "train.jsonl").string(), "--dev-questions", (data / "dev.jsonl").string(),
                                     "--test-questions", (data / "test.jsonl").string(), "--seed", "42"},
                                    out, err);
        if (status != 0) {
            return {false, fmt::format("round {} exited {}: {}", round, status, err.str())};
        }
        for (const auto& f : outputs) {
            contents[size_t(round)][f] = slurp(work / f);
        }
    }
    std::vector<std::string> differing;
    for (const auto& f : outputs) {
        if (contents[0][f].empty() || contents[0][f] != contents[1][f]) {
            differing.push_back(f);
        }
    }
    if (!differing.empty()) {
        return {false, fmt::format("differs or empty: {}", fmt::join(differing, ", "))};
    }
    return {true, fmt::format("{} output files bit-identical across two executions", outputs.size())};
}

}  // namespace

int
main(int argc, char** argv) {
    CLI::App app{"acceptance checks"};
    int only = 0;
    app.add_option("--only", only, "run a single criterion (1-10)")->check(CLI::Range(1, 10));
    CLI11_PARSE(app, argc, argv);

    const std::vector<Criterion> criteria{
        {1, "loss oracle", 1, loss_oracle},
        {2, "gradient fidelity", 30, gradient_fidelity},
        {3, "masked hard negatives", 5, masked_hard_negatives},
        {4, "MIPS exactness", 10, mips_exactness},
        {5, "dedup fidelity", 1, dedup_fidelity},
        {6, "synthetic retrieval", 180, synthetic_retrieval},
        {7, "hard-negative benefit", 600, hard_negative_benefit},
        {8, "reader correctness", 5, reader_correctness},
        {9, "metrics", 5, metrics_checks},
        {10, "recipe determinism", 600, recipe_determinism},
    };

    const auto scratch_root = fs::temp_directory_path() / fmt::format("tqa-acceptance-{}", ::getpid());
    int failures = 0;
    for (const auto& c : criteria) {
        if (only != 0 && c.number != only) {
            continue;
        }
        const auto scratch = scratch_root / std::to_string(c.number);
        fs::create_directories(scratch);
        const auto start = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = c.run(scratch);
        } catch (const std::exception& e) {
            v = {false, fmt::format("exception: {}", e.what())};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (secs > c.budget_s) {
            v.passed = false;
            v.detail += fmt::format("; over the {:.0f} s budget", c.budget_s);
        }
        fmt::print("{} {} {} ({:.2f} s) {}\n", v.passed ? "PASS" : "FAIL", c.number, c.name, secs, v.detail);
        std::fflush(stdout);
        failures += v.passed ? 0 : 1;
    }
    std::error_code ec;
    fs::remove_all(scratch_root, ec);
    return failures == 0 ? 0 : 1;
}
