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

#include "tqa/training.h"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <set>
#include <unordered_set>

#include "tqa/index.h"
#include "tqa/metrics.h"

namespace tqa {

std::vector<double>
softmax(std::span<const double> logits) {
    std::vector<double> out(logits.size());
    if (logits.empty()) {
        return out;
    }
    const double mx = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - mx);
        z += out[i];
    }
    for (auto& v : out) {
        v /= z;
    }
    return out;
}

namespace {

void
check_finite(const Matrix& m, const char* what) {
    for (double v : m.data) {
        if (!std::isfinite(v)) {
            throw Error(fmt::format("{} contains a non-finite score", what));
        }
    }
}

// Cross entropy of one logit row with label `gold`; writes softmax - onehot.
double
row_loss(std::span<const double> logits, size_t gold, std::span<double> grad) {
    const double mx = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (double v : logits) {
        z += std::exp(v - mx);
    }
    const double log_z = mx + std::log(z);
    for (size_t j = 0; j < logits.size(); ++j) {
        grad[j] = std::exp(logits[j] - log_z);
    }
    grad[gold] -= 1.0;
    return log_z - logits[gold];
}

}  // namespace

LossResult
in_batch_loss(const ScoreBatch& sb) {
    if (sb.S_hard) {
        throw Error("in_batch_loss called on a batch with hard negatives");
    }
    const size_t B = sb.S.rows;
    if (B == 0 || sb.S.cols != B) {
        throw Error(fmt::format("score matrix must be square and non-empty ({}x{})", sb.S.rows, sb.S.cols));
    }
    check_finite(sb.S, "S");
    LossResult r;
    r.grad_S = Matrix(B, B);
    for (size_t i = 0; i < B; ++i) {
        r.loss += row_loss(sb.S.row(i), i, r.grad_S.row(i));
    }
    r.loss /= double(B);
    for (auto& g : r.grad_S.data) {
        g /= double(B);
    }
    return r;
}

LossResult
hard_negative_loss(const ScoreBatch& sb) {
    if (!sb.S_hard) {
        throw Error("hard_negative_loss needs S_hard");
    }
    const size_t B = sb.S.rows;
    const auto& H = *sb.S_hard;
    if (B == 0 || sb.S.cols != B || H.rows != B || H.cols != B) {
        throw Error("hard_negative_loss: S and S_hard must both be BxB");
    }
    check_finite(sb.S, "S");
    check_finite(H, "S_hard");
    LossResult r;
    r.grad_S = Matrix(B, B);
    r.grad_S_hard = Matrix(B, B);
    std::vector<double> logits(2 * B);
    std::vector<double> grad(2 * B);
    for (size_t i = 0; i < B; ++i) {
        std::copy_n(sb.S.row(i).begin(), B, logits.begin());
        std::copy_n(H.row(i).begin(), B, logits.begin() + static_cast<long>(B));
        r.loss += row_loss(logits, i, grad);
        for (size_t j = 0; j < B; ++j) {
            r.grad_S(i, j) = grad[j] / double(B);
            r.grad_S_hard(i, j) = grad[B + j] / double(B);
        }
    }
    r.loss /= double(B);
    return r;
}

namespace {

SparseVector
apply_dropout(SparseVector x, double rate, Rng* rng) {
    if (rate <= 0.0 || rng == nullptr) {
        return x;
    }
    const double keep_scale = 1.0 / (1.0 - rate);
    SparseVector out;
    for (const auto& [k, v] : x.entries) {
        if (rng->uniform() >= rate) {
            out.entries.emplace_back(k, v * keep_scale);
        }
    }
    return out;
}

}  // namespace

FeatureBatch
featurize_batch(const EncoderParams& p, const Corpus& c, std::span<const TrainExample> batch,
                bool with_hard_negatives, double dropout, Rng* rng) {
    if (dropout < 0.0 || dropout >= 1.0) {
        throw Error(fmt::format("dropout must be in [0, 1), got {}", dropout));
    }
    const size_t B = batch.size();
    std::unordered_set<size_t> golds;
    for (const auto& ex : batch) {
        if (ex.table >= c.size()) {
            throw Error(fmt::format("training example refers to table #{} of {}", ex.table, c.size()));
        }
        if (!golds.insert(ex.table).second) {
            throw Error(fmt::format("duplicate gold table {} in one batch", c[ex.table].table_id));
        }
    }
    FeatureBatch fb;
    for (const auto& ex : batch) {
        fb.questions.push_back(apply_dropout(question_features(p, ex.text), dropout, rng));
        fb.tables.push_back(apply_dropout(table_features(p, c[ex.table]), dropout, rng));
    }
    if (with_hard_negatives) {
        fb.hard_masked = Matrix(B, B);
        for (size_t j = 0; j < B; ++j) {
            const auto& neg = batch[j].hard_negative;
            if (!neg) {
                fb.negatives.emplace_back();
                for (size_t i = 0; i < B; ++i) {
                    fb.hard_masked(i, j) = 1.0;
                }
                continue;
            }
            fb.negatives.emplace_back(apply_dropout(table_features(p, c[*neg]), dropout, rng));
            // Another question's gold table is not a negative for that question.
            for (size_t i = 0; i < B; ++i) {
                if (batch[i].table == *neg) {
                    fb.hard_masked(i, j) = 1.0;
                }
            }
        }
    }
    return fb;
}

namespace {

struct Forward {
    std::vector<Embedding> q, t, n;  // n[j] empty when absent
    ScoreBatch sb;
};

Forward
forward(const EncoderParams& p, const FeatureBatch& fb) {
    const size_t B = fb.questions.size();
    if (fb.tables.size() != B) {
        throw Error("feature batch has mismatched question/table counts");
    }
    Forward f;
    for (size_t i = 0; i < B; ++i) {
        f.q.push_back(p.question_tower.project(fb.questions[i]));
        f.t.push_back(p.table_tower.project(fb.tables[i]));
    }
    f.sb.S = Matrix(B, B);
    for (size_t i = 0; i < B; ++i) {
        for (size_t j = 0; j < B; ++j) {
            f.sb.S(i, j) = ret_score(f.q[i], f.t[j]);
        }
    }
    if (!fb.negatives.empty()) {
        if (fb.negatives.size() != B) {
            throw Error("feature batch must have one hard-negative slot per question");
        }
        Matrix H(B, B, kMaskedLogit);
        for (size_t j = 0; j < B; ++j) {
            if (!fb.negatives[j]) {
                f.n.emplace_back();
                continue;
            }
            f.n.push_back(p.table_tower.project(*fb.negatives[j]));
            for (size_t i = 0; i < B; ++i) {
                if (fb.hard_masked(i, j) == 0.0) {
                    H(i, j) = ret_score(f.q[i], f.n[j]);
                }
            }
        }
        f.sb.S_hard = std::move(H);
    }
    return f;
}

void
add_scaled(std::span<double> out, std::span<const double> v, double a) {
    for (size_t k = 0; k < out.size(); ++k) {
        out[k] += a * v[k];
    }
}

// Scatters an embedding gradient through h = W x + b.
void
scatter(const SparseVector& x, std::span<const double> dh, ColumnGrads& gw, std::vector<double>& gb) {
    add_scaled(gb, dh, 1.0);
    for (const auto& [k, v] : x.entries) {
        auto& col = gw[k];
        if (col.empty()) {
            col.assign(dh.size(), 0.0);
        }
        add_scaled(col, dh, v);
    }
}

}  // namespace

ScoreBatch
batch_scores(const EncoderParams& p, const FeatureBatch& fb) {
    return forward(p, fb).sb;
}

ScoreBatch
batch_scores(const EncoderParams& p, std::span<const Question> questions, std::span<const Table> tables,
             std::span<const Table* const> hard_negs) {
    if (questions.size() != tables.size()) {
        throw Error("batch_scores: question and table counts differ");
    }
    if (!hard_negs.empty() && hard_negs.size() != questions.size()) {
        throw Error("batch_scores: hard negatives must have one entry per question");
    }
    std::set<std::string> golds;
    FeatureBatch fb;
    for (size_t i = 0; i < questions.size(); ++i) {
        if (!golds.insert(tables[i].table_id).second) {
            throw Error(fmt::format("duplicate gold table {} in one batch", tables[i].table_id));
        }
        fb.questions.push_back(question_features(p, questions[i].text));
        fb.tables.push_back(table_features(p, tables[i]));
    }
    if (!hard_negs.empty()) {
        const size_t B = questions.size();
        fb.hard_masked = Matrix(B, B);
        for (size_t j = 0; j < B; ++j) {
            if (hard_negs[j] == nullptr) {
                fb.negatives.emplace_back();
                for (size_t i = 0; i < B; ++i) {
                    fb.hard_masked(i, j) = 1.0;
                }
                continue;
            }
            fb.negatives.emplace_back(table_features(p, *hard_negs[j]));
            for (size_t i = 0; i < B; ++i) {
                if (tables[i].table_id == hard_negs[j]->table_id) {
                    fb.hard_masked(i, j) = 1.0;
                }
            }
        }
    }
    return forward(p, fb).sb;
}

double
loss_and_gradients(const EncoderParams& p, const FeatureBatch& fb, EncoderGrads* grads) {
    auto f = forward(p, fb);
    const bool hard = f.sb.S_hard.has_value();
    const auto lr = hard ? hard_negative_loss(f.sb) : in_batch_loss(f.sb);
    if (grads == nullptr) {
        return lr.loss;
    }
    const size_t B = f.q.size();
    const size_t d = static_cast<size_t>(p.d);
    std::vector<Embedding> dq(B, Embedding(d, 0.0));
    std::vector<Embedding> dt(B, Embedding(d, 0.0));
    std::vector<Embedding> dn(B, Embedding(d, 0.0));
    for (size_t i = 0; i < B; ++i) {
        for (size_t j = 0; j < B; ++j) {
            const double g = lr.grad_S(i, j);
            add_scaled(dq[i], f.t[j], g);
            add_scaled(dt[j], f.q[i], g);
            if (hard && fb.negatives[j] && fb.hard_masked(i, j) == 0.0) {
                const double gh = lr.grad_S_hard(i, j);
                add_scaled(dq[i], f.n[j], gh);
                add_scaled(dn[j], f.q[i], gh);
            }
        }
    }
    *grads = EncoderGrads{};
    grads->question_bias.assign(d, 0.0);
    grads->table_bias.assign(d, 0.0);
    for (size_t i = 0; i < B; ++i) {
        scatter(fb.questions[i], dq[i], grads->question_weights, grads->question_bias);
        scatter(fb.tables[i], dt[i], grads->table_weights, grads->table_bias);
        if (hard && fb.negatives[i]) {
            scatter(*fb.negatives[i], dn[i], grads->table_weights, grads->table_bias);
        }
    }
    return lr.loss;
}

namespace {

void
require_finite(const ColumnGrads& g, const char* what) {
    for (const auto& [c, col] : g) {
        for (double v : col) {
            if (!std::isfinite(v)) {
                throw Error(fmt::format("non-finite gradient in {} column {}", what, c));
            }
        }
    }
}

void
require_finite(const std::vector<double>& g, const char* what) {
    for (size_t i = 0; i < g.size(); ++i) {
        if (!std::isfinite(g[i])) {
            throw Error(fmt::format("non-finite gradient in {} entry {}", what, i));
        }
    }
}

}  // namespace

double
backprop_and_step(TrainState& st, const FeatureBatch& fb, const LinearSchedule& schedule, const AdamOptions& opt) {
    EncoderGrads g;
    const double loss = loss_and_gradients(st.params, fb, &g);
    if (!std::isfinite(loss)) {
        throw Error(fmt::format("non-finite loss at step {}", st.step));
    }
    require_finite(g.question_weights, "question tower");
    require_finite(g.table_weights, "table tower");
    require_finite(g.question_bias, "question bias");
    require_finite(g.table_bias, "table bias");
    const double rate = schedule.at(st.step);
    const int64_t t = st.step + 1;
    adam_update(st.params.question_tower.weights, g.question_weights, st.question_weights, rate, t, opt);
    adam_update(st.params.question_tower.bias, g.question_bias, st.question_bias, rate, t, opt);
    adam_update(st.params.table_tower.weights, g.table_weights, st.table_weights, rate, t, opt);
    adam_update(st.params.table_tower.bias, g.table_bias, st.table_bias, rate, t, opt);
    st.step = t;
    return loss;
}

std::vector<TextTablePair>
generate_ict_pairs(const Corpus& c, int per_table, uint64_t seed) {
    if (per_table < 1) {
        throw Error("per_table must be >= 1");
    }
    constexpr size_t kMinSpan = 3;
    constexpr size_t kMaxSpan = 12;
    Rng rng(mix_seed(seed, 0x1c7));
    std::vector<TextTablePair> out;
    for (const auto& t : c) {
        std::vector<std::vector<std::string>> fields;
        for (const auto* text : {&t.page_title, t.section_title ? &*t.section_title : nullptr,
                                 t.caption ? &*t.caption : nullptr}) {
            if (text == nullptr) {
                continue;
            }
            auto toks = tokenize_words(*text);
            if (!toks.empty()) {
                fields.push_back(std::move(toks));
            }
        }
        if (fields.empty()) {
            continue;
        }
        std::set<std::string> seen;
        // A few extra draws so short fields that repeat do not starve the count.
        for (int attempt = 0; attempt < 4 * per_table && static_cast<int>(seen.size()) < per_table; ++attempt) {
            const auto& f = fields[rng.below(fields.size())];
            const size_t len_draw = kMinSpan + rng.below(kMaxSpan - kMinSpan + 1);
            const size_t len = std::min(len_draw, f.size());
            const size_t start = rng.below(f.size() - len + 1);
            std::string text;
            for (size_t k = start; k < start + len; ++k) {
                if (!text.empty()) {
                    text.push_back(' ');
                }
                text += f[k];
            }
            if (seen.insert(text).second) {
                out.push_back({std::move(text), t.table_id});
            }
        }
    }
    return out;
}

TrainOptions
TrainOptions::from_config(const Config& cfg) {
    TrainOptions o;
    o.batch_size = cfg.batch_size;
    o.max_steps = cfg.max_steps;
    o.learning_rate = cfg.learning_rate;
    o.warmup_frac = cfg.warmup_frac;
    o.eval_every = cfg.eval_every;
    o.patience = cfg.patience;
    o.dropout = cfg.dropout;
    o.eval_k = static_cast<size_t>(cfg.top_k);
    o.seed = cfg.seed;
    o.threads = cfg.threads;
    return o;
}

namespace {

// Draws batches without replacement, reshuffling each epoch. Items whose
// gold table is already in the batch wait for a later batch; whatever cannot
// fill a batch at the end of an epoch is dropped.
class Batcher {
public:
    Batcher(std::span<const TrainExample> data, size_t batch, uint64_t seed)
        : data_(data), batch_(batch), rng_(seed) {
    }

    std::vector<TrainExample>
    next() {
        for (int round = 0; round < 2; ++round) {
            std::vector<TrainExample> out;
            std::unordered_set<size_t> tables;
            std::deque<size_t> skipped;
            while (!queue_.empty() && out.size() < batch_) {
                const size_t i = queue_.front();
                queue_.pop_front();
                if (tables.insert(data_[i].table).second) {
                    out.push_back(data_[i]);
                } else {
                    skipped.push_back(i);
                }
            }
            queue_.insert(queue_.begin(), skipped.begin(), skipped.end());
            if (out.size() == batch_) {
                return out;
            }
            refill();
        }
        throw Error("could not assemble a batch of distinct gold tables");
    }

private:
    void
    refill() {
        std::vector<size_t> order(data_.size());
        for (size_t i = 0; i < order.size(); ++i) {
            order[i] = i;
        }
        rng_.shuffle(order);
        queue_.assign(order.begin(), order.end());
    }

    std::span<const TrainExample> data_;
    size_t batch_;
    Rng rng_;
    std::deque<size_t> queue_;
};

struct DevScore {
    double recall = 0.0;
    double mrr = 0.0;
};

DevScore
dev_score(const EncoderParams& p, const DevSet& dev, const TrainOptions& opt) {
    const auto idx = encode_corpus(p, dev.tables, opt.threads);
    const auto run = run_retrieval(idx, p, dev.examples, opt.eval_k, opt.threads);
    return {recall_at_k(run, dev.examples, opt.eval_k), mean_reciprocal_rank(run, dev.examples, opt.eval_k)};
}

}  // namespace

TrainResult
train(TrainState init, const Corpus& c, std::span<const TrainExample> data, const DevSet* dev,
      const TrainOptions& opt) {
    TrainResult result{std::move(init), 0, {}};
    if (opt.max_steps <= 0) {
        result.best_step = result.state.step;
        return result;
    }
    if (data.empty()) {
        throw Error("training data is empty");
    }
    if (opt.batch_size < 1) {
        throw Error("batch size must be >= 1");
    }
    std::unordered_set<size_t> distinct;
    bool any_hard = false;
    for (const auto& ex : data) {
        distinct.insert(ex.table);
        any_hard = any_hard || ex.hard_negative.has_value();
    }
    const auto B = static_cast<size_t>(opt.batch_size);
    if (distinct.size() < B) {
        throw Error(fmt::format("batch size {} exceeds the {} distinct gold tables in the data", B,
                                distinct.size()));
    }
    const bool use_dev = dev != nullptr && !dev->examples.empty();
    TrainState st = result.state;
    TrainState best = st;
    const int64_t start = st.step;
    const int64_t end = start + opt.max_steps;
    LinearSchedule schedule{opt.learning_rate,
                            static_cast<int64_t>(std::llround(opt.warmup_frac * double(opt.max_steps))),
                            opt.max_steps, start};
    Batcher batcher(data, B, mix_seed(opt.seed, 3));
    Rng dropout_rng(mix_seed(opt.seed, 4));
    int64_t best_step = start;

    // Returns true when patience is exhausted.
    auto evaluate = [&](double loss) {
        const auto r = dev_score(st.params, *dev, opt);
        result.log.push_back({st.step, loss, r.recall, r.mrr});
        const bool improved =
            r.recall > st.best_recall || (r.recall == st.best_recall && r.mrr > st.best_mrr);
        if (improved) {
            st.best_recall = r.recall;
            st.best_mrr = r.mrr;
            st.evals_since_improvement = 0;
            best = st;
            best_step = st.step;
        } else {
            ++st.evals_since_improvement;
        }
        return st.evals_since_improvement >= opt.patience;
    };

    if (use_dev) {
        st.best_recall = -1.0;
        st.best_mrr = -1.0;
        st.evals_since_improvement = 0;
        evaluate(std::nan(""));
    }
    while (st.step < end) {
        const auto batch = batcher.next();
        const auto fb = featurize_batch(st.params, c, batch, any_hard, opt.dropout, &dropout_rng);
        const double loss = backprop_and_step(st, fb, schedule);
        const bool at_eval = (st.step - start) % opt.eval_every == 0 || st.step == end;
        if (use_dev && at_eval) {
            if (evaluate(loss)) {
                break;
            }
        } else {
            result.log.push_back({st.step, loss, std::nullopt, std::nullopt});
        }
    }
    result.state = use_dev ? std::move(best) : std::move(st);
    result.best_step = use_dev ? best_step : result.state.step;
    return result;
}

void
save_train_log(const std::vector<TrainLogRow>& log, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(fmt::format("cannot write {}", path.string()));
    }
    out << "step\tloss\tdev_recall\tdev_mrr\n";
    auto opt_field = [](const std::optional<double>& v) { return v ? fmt::format("{:.6f}", *v) : std::string(); };
    for (const auto& row : log) {
        out << fmt::format("{}\t{}\t{}\t{}\n", row.step,
                           std::isnan(row.loss) ? std::string() : fmt::format("{:.9g}", row.loss),
                           opt_field(row.dev_recall), opt_field(row.dev_mrr));
    }
}

}  // namespace tqa
