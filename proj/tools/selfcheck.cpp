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
#include <cmath>
#include <fstream>
#include <functional>

#include "cli.h"
#include "tqa/dedup.h"
#include "tqa/encoder.h"
#include "tqa/index.h"
#include "tqa/metrics.h"
#include "tqa/reader.h"
#include "tqa/synthetic.h"
#include "tqa/training.h"

namespace tqa::cli {

namespace fs = std::filesystem;

namespace {

Matrix
random_matrix(Rng& rng, size_t r, size_t c, double scale) {
    Matrix m(r, c);
    for (auto& v : m.data) {
        v = rng.uniform(-scale, scale);
    }
    return m;
}

double
relative_error(double a, double b) {
    return std::abs(a - b) / std::max(1e-6, std::abs(a) + std::abs(b));
}

// Central differences over every entry of the stored gradient columns.
double
max_column_error(LazyMatrix& w, const ColumnGrads& grads, const std::function<double()>& loss) {
    const double h = 1e-3;
    double worst = 0.0;
    for (const auto& [c, g] : grads) {
        for (size_t k = 0; k < g.size(); ++k) {
            const double old = w.materialize(c)[k];
            w.materialize(c)[k] = old + h;
            const double up = loss();
            w.materialize(c)[k] = old - h;
            const double down = loss();
            w.materialize(c)[k] = old;
            worst = std::max(worst, relative_error((up - down) / (2 * h), g[k]));
        }
    }
    return worst;
}

double
max_vector_error(std::vector<double>& w, std::span<const double> grads, const std::function<double()>& loss) {
    const double h = 1e-3;
    double worst = 0.0;
    for (size_t k = 0; k < w.size(); ++k) {
        const double old = w[k];
        w[k] = old + h;
        const double up = loss();
        w[k] = old - h;
        const double down = loss();
        w[k] = old;
        worst = std::max(worst, relative_error((up - down) / (2 * h), grads[k]));
    }
    return worst;
}

CheckResult
check(const std::string& name, const std::function<std::string()>& body) {
    try {
        auto failure = body();
        return {name, failure.empty(), failure};
    } catch (const std::exception& e) {
        return {name, false, e.what()};
    }
}

}  // namespace

std::vector<CheckResult>
selfcheck(uint64_t seed, const fs::path& scratch) {
    std::vector<CheckResult> out;
    NearDuplicateSetOptions small;
    small.num_questions = 12;
    small.train = 8;
    small.dev = 2;
    small.test = 2;
    small.seed = seed;
    const auto set = make_near_duplicate_set(small);

    out.push_back(check("in-batch loss of zero scores is ln B", [] {
        for (size_t b : {2, 4, 8, 16}) {
            const double loss = in_batch_loss({Matrix(b, b), std::nullopt}).loss;
            if (std::abs(loss - std::log(double(b))) > 1e-9) {
                return fmt::format("B={} gave {}", b, loss);
            }
        }
        return std::string();
    }));
    out.push_back(check("hard-negative loss of zero scores is ln 2B", [] {
        for (size_t b : {2, 4, 8, 16}) {
            const double loss = hard_negative_loss({Matrix(b, b), Matrix(b, b)}).loss;
            if (std::abs(loss - std::log(2.0 * double(b))) > 1e-9) {
                return fmt::format("B={} gave {}", b, loss);
            }
        }
        return std::string();
    }));
    out.push_back(check("masked hard negatives reduce to the in-batch loss", [seed] {
        Rng rng(mix_seed(seed, 101));
        for (int trial = 0; trial < 100; ++trial) {
            const size_t b = 2 + rng.below(15);
            auto s = random_matrix(rng, b, b, 5.0);
            const double plain = in_batch_loss({s, std::nullopt}).loss;
            const double masked = hard_negative_loss({s, Matrix(b, b, kMaskedLogit)}).loss;
            if (std::abs(plain - masked) > 1e-6) {
                return fmt::format("trial {}: {} vs {}", trial, plain, masked);
            }
        }
        return std::string();
    }));
    out.push_back(check("softmax sums to one and ignores shifts", [seed] {
        Rng rng(mix_seed(seed, 102));
        for (int trial = 0; trial < 50; ++trial) {
            std::vector<double> x(1 + rng.below(20));
            for (auto& v : x) {
                v = rng.uniform(-30, 30);
            }
            auto p = softmax(x);
            double sum = 0.0;
            for (double v : p) {
                sum += v;
            }
            auto shifted = x;
            for (auto& v : shifted) {
                v += 1000.0;
            }
            const auto q = softmax(shifted);
            for (size_t i = 0; i < p.size(); ++i) {
                if (std::abs(p[i] - q[i]) > 1e-12) {
                    return fmt::format("shift changed entry {}", i);
                }
            }
            if (std::abs(sum - 1.0) > 1e-12) {
                return fmt::format("sum {}", sum);
            }
        }
        return std::string();
    }));
    out.push_back(check("encoder gradients match finite differences", [&] {
        EncoderOptions eo;
        eo.d = 8;
        eo.feature_dims = 4096;
        eo.init_scale = 0.3;
        eo.seed = seed;
        auto p = make_encoder(eo);
        std::vector<TrainExample> batch;
        for (size_t i = 0; i < 4; ++i) {
            const auto& q = set.train[i];
            auto dup = *q.gold_table_id;
            dup.back() = dup.back() == 'a' ? 'b' : 'a';
            batch.push_back({q.question.text, *set.tables.index_of(*q.gold_table_id),
                             i == 1 ? std::nullopt : set.tables.index_of(dup)});
        }
        double worst = 0.0;
        for (bool hard : {false, true}) {
            const auto fb = featurize_batch(p, set.tables, batch, hard);
            EncoderGrads g;
            loss_and_gradients(p, fb, &g);
            auto loss = [&] { return loss_and_gradients(p, fb, nullptr); };
            worst = std::max(worst, max_column_error(p.question_tower.weights, g.question_weights, loss));
            worst = std::max(worst, max_column_error(p.table_tower.weights, g.table_weights, loss));
            worst = std::max(worst, max_vector_error(p.question_tower.bias, g.question_bias, loss));
            worst = std::max(worst, max_vector_error(p.table_tower.bias, g.table_bias, loss));
        }
        return worst < 1e-4 ? std::string() : fmt::format("max relative error {:.3g}", worst);
    }));
    out.push_back(check("reader gradients match finite differences", [&] {
        ReaderOptions ro;
        ro.r = 4;
        ro.hidden = 3;
        ro.feature_dims = 4096;
        ro.seed = seed;
        ro.init_scale = 0.5;
        auto rp = make_reader(ro);
        std::vector<ReaderExample> examples;
        for (size_t i = 0; i < 2; ++i) {
            const auto& q = set.train[i];
            auto dup = *q.gold_table_id;
            dup.back() = dup.back() == 'a' ? 'b' : 'a';
            examples.push_back({q.question, {set.tables.find(dup), set.tables.find(*q.gold_table_id)}, 1, q.answers});
        }
        ReaderGrads g;
        reader_loss(rp, examples, &g);
        auto loss = [&] { return reader_loss(rp, examples, nullptr).total; };
        double worst = max_vector_error(rp.dense, g.dense, loss);
        // A sample of embedding columns keeps the check fast.
        ColumnGrads sample;
        for (const auto& [c, col] : g.embeddings) {
            if (sample.size() < 12) {
                sample.emplace(c, col);
            }
        }
        worst = std::max(worst, max_column_error(rp.embeddings, sample, loss));
        return worst < 1e-4 ? std::string() : fmt::format("max relative error {:.3g}", worst);
    }));
    out.push_back(check("exact search matches a full sort", [seed] {
        Rng rng(mix_seed(seed, 103));
        const size_t d = 32;
        EmbeddingIndex idx(d);
        for (size_t i = 0; i < 300; ++i) {
            std::vector<double> v(d);
            for (auto& x : v) {
                x = rng.uniform(-1, 1);
            }
            idx.add(fmt::format("t{:04d}", rng.below(1000000) * 1000 + i), v);
        }
        for (int trial = 0; trial < 20; ++trial) {
            std::vector<double> q(d);
            for (auto& x : q) {
                x = rng.uniform(-1, 1);
            }
            std::vector<ScoredTable> all;
            for (size_t i = 0; i < idx.size(); ++i) {
                double s = 0.0;
                const auto v = idx.vector(i);
                for (size_t k = 0; k < d; ++k) {
                    s += double(v[k]) * q[k];
                }
                all.push_back({idx.ids()[i], s});
            }
            std::sort(all.begin(), all.end(), ranks_before);
            for (size_t k : {1, 10, 50}) {
                const auto got = search(idx, q, k);
                if (!std::equal(got.begin(), got.end(), all.begin(), all.begin() + long(k))) {
                    return fmt::format("trial {} K={} differs", trial, k);
                }
            }
        }
        return std::string();
    }));
    out.push_back(check("dedup clustering is deterministic", [seed] {
        Rng rng(mix_seed(seed, 104));
        WordForge words(mix_seed(seed, 105));
        std::vector<std::string> vocab;
        for (int i = 0; i < 40; ++i) {
            vocab.push_back(words.next());
        }
        Table base{"p0", "page", "v0", std::nullopt, std::nullopt, {"a", "b", "c"}, {}, false};
        for (int r = 0; r < 8; ++r) {
            base.rows.push_back({vocab[rng.below(40)], vocab[rng.below(40)], vocab[rng.below(40)]});
        }
        std::vector<Table> tables;
        for (int i = 0; i < 8; ++i) {
            Table t = base;
            t.table_id = fmt::format("p{}", i);
            t.page_version = fmt::format("v{}", i % 3);
            for (int e = 0; e < i % 4; ++e) {
                t.rows[rng.below(t.rows.size())][rng.below(3)] = vocab[rng.below(40)];
            }
            tables.push_back(std::move(t));
        }
        const auto first = cluster_page(tables);
        for (int run = 0; run < 10; ++run) {
            auto shuffled = tables;
            rng.shuffle(shuffled);
            if (cluster_page(shuffled) != first) {
                return fmt::format("run {} gave different clusters", run);
            }
        }
        return std::string();
    }));
    out.push_back(check("encoder checkpoint round trip", [&] {
        EncoderOptions eo;
        eo.d = 16;
        eo.feature_dims = 4096;
        eo.seed = seed;
        auto p = make_encoder(eo);
        // Touch a few columns so the sparse block is non-trivial.
        for (uint32_t c : {3u, 77u, 4095u}) {
            p.question_tower.weights.materialize(c)[0] = 0.25;
            p.table_tower.weights.materialize(c)[1] = -0.5;
        }
        // Values are stored as f32, so the first load rounds; after that the trip is exact.
        const auto path = scratch / "selfcheck.ckpt";
        const auto again = scratch / "selfcheck.again.ckpt";
        save_checkpoint(p, path);
        const auto loaded = load_checkpoint(path);
        save_checkpoint(loaded, again);
        if (read_file(path) != read_file(again) || load_checkpoint(again) != loaded) {
            return std::string("second round trip changed the checkpoint");
        }
        std::vector<double> a(eo.d), b(eo.d);
        for (uint32_t c : {3u, 77u, 1000u}) {
            p.question_tower.weights.read_column(c, a);
            loaded.question_tower.weights.read_column(c, b);
            for (size_t k = 0; k < a.size(); ++k) {
                if (std::abs(a[k] - b[k]) > 1e-6) {
                    return fmt::format("column {} entry {} moved by {}", c, k, a[k] - b[k]);
                }
            }
        }
        return std::string();
    }));
    out.push_back(check("corrupted checkpoint reports its offset", [&] {
        const auto path = scratch / "selfcheck.ckpt";
        const auto bytes = read_file(path);
        const auto bad = scratch / "selfcheck.truncated.ckpt";
        {
            std::ofstream f(bad, std::ios::binary | std::ios::trunc);
            f.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
        }
        try {
            load_checkpoint(bad);
        } catch (const FormatError& e) {
            return e.offset() <= bytes.size() / 2 ? std::string() : fmt::format("offset {} past the end", e.offset());
        }
        return std::string("truncated checkpoint loaded without error");
    }));
    out.push_back(check("recall@k is monotone in k", [seed] {
        Rng rng(mix_seed(seed, 106));
        std::vector<QAExample> examples;
        RetrievalRun run("file");
        for (int i = 0; i < 30; ++i) {
            const auto qid = fmt::format("q{}", i);
            examples.push_back({{qid, "text"}, fmt::format("t{}", rng.below(20)), {"x"}});
            std::vector<ScoredTable> ranked;
            for (int r = 0; r < 20; ++r) {
                ranked.push_back({fmt::format("t{}", (r + i) % 20), 20.0 - r});
            }
            run.add({qid, ranked});
        }
        double prev = 0.0;
        for (size_t k = 1; k <= 20; ++k) {
            const double r = recall_at_k(run, examples, k);
            if (r + 1e-15 < prev) {
                return fmt::format("recall dropped at k={}", k);
            }
            prev = r;
        }
        return prev == 1.0 ? std::string() : std::string("full depth did not reach recall 1");
    }));
    out.push_back(check("McNemar test matches the chi-square tail", [] {
        std::vector<int> a, b;
        for (int i = 0; i < 5; ++i) {
            a.push_back(1);
            b.push_back(0);
        }
        for (int i = 0; i < 15; ++i) {
            a.push_back(0);
            b.push_back(1);
        }
        const auto r = mcnemar(a, b);
        // chi-square(1) upper tail at 4.05 is 0.04417.
        if (std::abs(r.statistic - 4.05) > 1e-12 || std::abs(r.p_value - 0.04417) > 5e-5) {
            return fmt::format("statistic {} p {}", r.statistic, r.p_value);
        }
        return std::string();
    }));
    return out;
}

}  // namespace tqa::cli
