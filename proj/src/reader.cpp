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

#include "tqa/reader.h"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace tqa {

ReaderOptions
ReaderOptions::from_config(const Config& cfg) {
    ReaderOptions o;
    o.r = cfg.reader_dim;
    o.hidden = cfg.reader_hidden;
    o.feature_dims = static_cast<uint32_t>(cfg.reader_feature_dims);
    o.include_header = cfg.reader_include_header;
    o.max_answer_len = cfg.max_answer_len;
    o.seed = cfg.seed;
    return o;
}

ReaderParams
make_reader(const ReaderOptions& opt) {
    if (opt.r < 1 || opt.hidden < 1 || opt.feature_dims < 1 || opt.max_answer_len < 1) {
        throw Error("reader dimensions and max answer length must be >= 1");
    }
    ReaderParams rp;
    rp.r = opt.r;
    rp.hidden = opt.hidden;
    rp.feature_dims = opt.feature_dims;
    rp.include_header = opt.include_header;
    rp.max_answer_len = opt.max_answer_len;
    const double emb_scale = opt.init_scale < 0 ? 1.0 / std::sqrt(double(opt.r)) : opt.init_scale;
    rp.embeddings = LazyMatrix(size_t(opt.r), opt.feature_dims, mix_seed(opt.seed, 11), emb_scale);
    rp.dense.assign(rp.dense_size(), 0.0);
    if (opt.init_scale != 0.0) {
        Rng rng(mix_seed(opt.seed, 12));
        const double s1 = 1.0 / std::sqrt(2.0 * opt.r);
        for (size_t i = rp.w1_offset(); i < rp.b1_offset(); ++i) {
            rp.dense[i] = rng.uniform(-s1, s1);
        }
        const double s2 = 1.0 / std::sqrt(double(opt.hidden));
        for (size_t i = rp.w2_offset(); i < rp.b2_offset(); ++i) {
            rp.dense[i] = rng.uniform(-s2, s2);
        }
    }
    return rp;
}

double
softplus(double x) {
    return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

namespace {

double
sigmoid(double x) {
    return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

struct CellRef {
    int row = 0;
    int col = 0;
    const std::string* text = nullptr;
};

std::vector<CellRef>
answer_cells(const Table& t, bool include_header) {
    std::vector<CellRef> cells;
    if (include_header) {
        for (size_t c = 0; c < t.header.size(); ++c) {
            cells.push_back({0, int(c + 1), &t.header[c]});
        }
    }
    for (size_t r = 0; r < t.rows.size(); ++r) {
        for (size_t c = 0; c < t.rows[r].size(); ++c) {
            cells.push_back({int(r + 1), int(c + 1), &t.rows[r][c]});
        }
    }
    return cells;
}

}  // namespace

std::vector<SpanCandidate>
enumerate_spans(const Table& t, int max_len, bool include_header) {
    if (max_len < 1) {
        throw Error("max answer length must be >= 1");
    }
    std::vector<SpanCandidate> out;
    for (const auto& cell : answer_cells(t, include_header)) {
        const auto seq = tokenize(*cell.text);
        const int n = static_cast<int>(seq.tokens.size());
        for (int s = 0; s < n; ++s) {
            for (int e = s; e < std::min(n, s + max_len); ++e) {
                const size_t b = seq.spans[size_t(s)].first;
                const size_t end = seq.spans[size_t(e)].second;
                out.push_back({cell.row, cell.col, s, e, cell.text->substr(b, end - b)});
            }
        }
    }
    return out;
}

TableEncoding
encode_for_reader(const ReaderParams& rp, std::string_view question, const Table& t) {
    TableEncoding enc;
    const size_t r = size_t(rp.r);
    for (const auto& qt : question_tokens(question)) {
        std::vector<uint32_t> ids;
        token_feature_ids(qt, rp.feature_dims, false, ids);
        enc.question_feats.push_back(ids.front());
    }
    enc.question_mean.assign(r, 0.0);
    if (!enc.question_feats.empty()) {
        std::vector<double> col(r);
        for (auto f : enc.question_feats) {
            rp.embeddings.read_column(f, col);
            for (size_t k = 0; k < r; ++k) {
                enc.question_mean[k] += col[k];
            }
        }
        for (auto& v : enc.question_mean) {
            v /= double(enc.question_feats.size());
        }
    }
    enc.tokens = flatten_table(t, FlattenMode::kFull);
    enc.feats.resize(enc.tokens.size());
    enc.reps.assign(enc.tokens.size(), enc.question_mean);
    std::vector<double> col(r);
    for (size_t i = 0; i < enc.tokens.size(); ++i) {
        token_feature_ids(enc.tokens[i], rp.feature_dims, true, enc.feats[i]);
        for (auto f : enc.feats[i]) {
            rp.embeddings.read_column(f, col);
            for (size_t k = 0; k < r; ++k) {
                enc.reps[i][k] += col[k];
            }
        }
    }
    return enc;
}

std::vector<double>
token_representation(const ReaderParams& rp, const Question& q, const Table& t, size_t position) {
    auto enc = encode_for_reader(rp, q.text, t);
    if (position >= enc.reps.size()) {
        throw Error(fmt::format("token position {} out of range ({} tokens)", position, enc.reps.size()));
    }
    return std::move(enc.reps[position]);
}

namespace {

// Position of each answer cell's first token inside the encoding.
std::map<std::pair<int, int>, size_t>
cell_starts(const TableEncoding& enc) {
    std::map<std::pair<int, int>, size_t> starts;
    for (size_t i = 0; i < enc.tokens.size(); ++i) {
        const auto& tok = enc.tokens[i];
        if (tok.segment == Segment::kHeader || tok.segment == Segment::kCell) {
            starts.try_emplace({tok.row_idx, tok.col_idx}, i);
        }
    }
    return starts;
}

struct SpanForward {
    std::vector<size_t> start_pos, end_pos;
    std::vector<std::vector<double>> left, right;  // w1 halves applied to every token
    std::vector<std::vector<double>> z;            // pre-activations per span
    std::vector<double> scores;
};

SpanForward
span_forward(const ReaderParams& rp, const TableEncoding& enc, std::span<const SpanCandidate> spans) {
    const size_t r = size_t(rp.r);
    const size_t H = size_t(rp.hidden);
    const double* w1 = rp.dense.data() + rp.w1_offset();
    const double* b1 = rp.dense.data() + rp.b1_offset();
    const double* w2 = rp.dense.data() + rp.w2_offset();
    const double b2 = rp.dense[rp.b2_offset()];
    const auto starts = cell_starts(enc);
    SpanForward f;
    std::vector<char> needed(enc.reps.size(), 0);
    for (const auto& s : spans) {
        auto it = starts.find({s.row_idx, s.col_idx});
        if (it == starts.end()) {
            throw Error(fmt::format("span refers to empty cell ({}, {})", s.row_idx, s.col_idx));
        }
        f.start_pos.push_back(it->second + size_t(s.token_start));
        f.end_pos.push_back(it->second + size_t(s.token_end));
        needed[f.start_pos.back()] = needed[f.end_pos.back()] = 1;
    }
    f.left.resize(enc.reps.size());
    f.right.resize(enc.reps.size());
    for (size_t t = 0; t < enc.reps.size(); ++t) {
        if (!needed[t]) {
            continue;
        }
        f.left[t].assign(H, 0.0);
        f.right[t].assign(H, 0.0);
        for (size_t j = 0; j < H; ++j) {
            const double* row = w1 + j * 2 * r;
            double a = 0.0, b = 0.0;
            for (size_t k = 0; k < r; ++k) {
                a += row[k] * enc.reps[t][k];
                b += row[r + k] * enc.reps[t][k];
            }
            f.left[t][j] = a;
            f.right[t][j] = b;
        }
    }
    f.z.resize(spans.size());
    f.scores.resize(spans.size());
    for (size_t s = 0; s < spans.size(); ++s) {
        auto& z = f.z[s];
        z.resize(H);
        double score = b2;
        for (size_t j = 0; j < H; ++j) {
            z[j] = f.left[f.start_pos[s]][j] + f.right[f.end_pos[s]][j] + b1[j];
            score += w2[j] * softplus(z[j]);
        }
        f.scores[s] = score;
    }
    return f;
}

double
candidate_logit(const ReaderParams& rp, const TableEncoding& enc, std::vector<double>* pooled_out = nullptr) {
    const size_t r = size_t(rp.r);
    std::vector<double> pooled(r, 0.0);
    for (const auto& h : enc.reps) {
        for (size_t k = 0; k < r; ++k) {
            pooled[k] += h[k];
        }
    }
    if (!enc.reps.empty()) {
        for (auto& v : pooled) {
            v /= double(enc.reps.size());
        }
    }
    double logit = rp.dense[rp.bc_offset()];
    for (size_t k = 0; k < r; ++k) {
        logit += rp.dense[rp.wc_offset() + k] * pooled[k];
    }
    if (pooled_out) {
        *pooled_out = std::move(pooled);
    }
    return logit;
}

}  // namespace

std::vector<double>
score_spans(const ReaderParams& rp, const Question& q, const Table& t, std::span<const SpanCandidate> spans) {
    if (spans.empty()) {
        throw Error(fmt::format("table {} has no answer spans", t.table_id));
    }
    return span_forward(rp, encode_for_reader(rp, q.text, t), spans).scores;
}

double
score_candidate(const ReaderParams& rp, const Question& q, const Table& t) {
    return candidate_logit(rp, encode_for_reader(rp, q.text, t));
}

bool
span_matches(const SpanCandidate& s, std::span<const std::string> answers) {
    const auto toks = tokenize_words(s.text);
    return std::any_of(answers.begin(), answers.end(), [&](const std::string& a) {
        const auto at = tokenize_words(a);
        return !at.empty() && at == toks;
    });
}

namespace {

// Adds dh (r) into the gradients of every embedding column feeding token t
// and into the question-mean accumulator.
void
push_token_grad(const TableEncoding& enc, size_t t, std::span<const double> dh, ColumnGrads& g,
                std::vector<double>& dq) {
    for (auto f : enc.feats[t]) {
        auto& col = g[f];
        if (col.empty()) {
            col.assign(dh.size(), 0.0);
        }
        for (size_t k = 0; k < dh.size(); ++k) {
            col[k] += dh[k];
        }
    }
    for (size_t k = 0; k < dh.size(); ++k) {
        dq[k] += dh[k];
    }
}

void
flush_question_grad(const TableEncoding& enc, std::span<const double> dq, ColumnGrads& g) {
    if (enc.question_feats.empty()) {
        return;
    }
    const double inv = 1.0 / double(enc.question_feats.size());
    for (auto f : enc.question_feats) {
        auto& col = g[f];
        if (col.empty()) {
            col.assign(dq.size(), 0.0);
        }
        for (size_t k = 0; k < dq.size(); ++k) {
            col[k] += dq[k] * inv;
        }
    }
}

}  // namespace

ReaderLoss
reader_loss(const ReaderParams& rp, std::span<const ReaderExample> examples, ReaderGrads* grads) {
    if (examples.empty()) {
        throw Error("reader_loss needs at least one example");
    }
    const size_t r = size_t(rp.r);
    const size_t H = size_t(rp.hidden);
    const double scale = 1.0 / double(examples.size());
    if (grads) {
        grads->embeddings.clear();
        grads->dense.assign(rp.dense_size(), 0.0);
    }
    ReaderLoss total;
    for (const auto& ex : examples) {
        if (ex.gold >= ex.candidates.size()) {
            throw Error(fmt::format("question {}: gold index out of range", ex.question.question_id));
        }
        // Span term on the gold table.
        const Table& gold = *ex.candidates[ex.gold];
        const auto spans = enumerate_spans(gold, rp.max_answer_len, rp.include_header);
        std::vector<char> match(spans.size());
        bool any = false;
        for (size_t s = 0; s < spans.size(); ++s) {
            match[s] = span_matches(spans[s], ex.answers);
            any = any || match[s];
        }
        if (!any) {
            throw Error(fmt::format("question {}: gold table has no span matching an answer",
                                    ex.question.question_id));
        }
        const auto enc = encode_for_reader(rp, ex.question.text, gold);
        const auto f = span_forward(rp, enc, spans);
        const double mx = *std::max_element(f.scores.begin(), f.scores.end());
        double z_all = 0.0, z_match = 0.0;
        for (size_t s = 0; s < spans.size(); ++s) {
            const double e = std::exp(f.scores[s] - mx);
            z_all += e;
            z_match += match[s] ? e : 0.0;
        }
        const double span_loss = std::log(z_all) - std::log(z_match);
        total.span += span_loss * scale;

        // Candidate term: mean logistic loss.
        const double cscale = 1.0 / double(ex.candidates.size());
        std::vector<TableEncoding> cand_enc;
        std::vector<std::vector<double>> pooled(ex.candidates.size());
        std::vector<double> dlogit(ex.candidates.size());
        double cand_loss = 0.0;
        for (size_t c = 0; c < ex.candidates.size(); ++c) {
            cand_enc.push_back(c == ex.gold ? enc : encode_for_reader(rp, ex.question.text, *ex.candidates[c]));
            const double logit = candidate_logit(rp, cand_enc.back(), &pooled[c]);
            const double y = c == ex.gold ? 1.0 : 0.0;
            // -[y log s + (1-y) log(1-s)] = softplus(logit) - y * logit
            cand_loss += (softplus(logit) - y * logit) * cscale;
            dlogit[c] = (sigmoid(logit) - y) * cscale * scale;
        }
        total.candidate += cand_loss * scale;
        if (!grads) {
            continue;
        }
        auto& gd = grads->dense;
        const double* w1 = rp.dense.data() + rp.w1_offset();
        const double* w2 = rp.dense.data() + rp.w2_offset();

        // Span softmax gradient: p - p restricted to matches and renormalized.
        std::vector<std::vector<double>> g_left(enc.reps.size()), g_right(enc.reps.size());
        for (size_t s = 0; s < spans.size(); ++s) {
            const double p = std::exp(f.scores[s] - mx) / z_all;
            const double q = match[s] ? std::exp(f.scores[s] - mx) / z_match : 0.0;
            const double ds = (p - q) * scale;
            if (ds == 0.0) {
                continue;
            }
            gd[rp.b2_offset()] += ds;
            auto& gl = g_left[f.start_pos[s]];
            auto& gr = g_right[f.end_pos[s]];
            if (gl.empty()) {
                gl.assign(H, 0.0);
            }
            if (gr.empty()) {
                gr.assign(H, 0.0);
            }
            for (size_t j = 0; j < H; ++j) {
                const double zj = f.z[s][j];
                gd[rp.w2_offset() + j] += ds * softplus(zj);
                const double dz = ds * w2[j] * sigmoid(zj);
                gd[rp.b1_offset() + j] += dz;
                gl[j] += dz;
                gr[j] += dz;
            }
        }
        std::vector<double> dq(r, 0.0);
        std::vector<double> dh(r);
        for (size_t t = 0; t < enc.reps.size(); ++t) {
            if (g_left[t].empty() && g_right[t].empty()) {
                continue;
            }
            std::fill(dh.begin(), dh.end(), 0.0);
            for (size_t j = 0; j < H; ++j) {
                const double* row = w1 + j * 2 * r;
                double* grow = gd.data() + rp.w1_offset() + j * 2 * r;
                const double a = g_left[t].empty() ? 0.0 : g_left[t][j];
                const double b = g_right[t].empty() ? 0.0 : g_right[t][j];
                for (size_t k = 0; k < r; ++k) {
                    grow[k] += a * enc.reps[t][k];
                    grow[r + k] += b * enc.reps[t][k];
                    dh[k] += a * row[k] + b * row[r + k];
                }
            }
            push_token_grad(enc, t, dh, grads->embeddings, dq);
        }
        flush_question_grad(enc, dq, grads->embeddings);

        // Candidate scorer gradient through mean pooling.
        for (size_t c = 0; c < ex.candidates.size(); ++c) {
            const auto& ce = cand_enc[c];
            gd[rp.bc_offset()] += dlogit[c];
            for (size_t k = 0; k < r; ++k) {
                gd[rp.wc_offset() + k] += dlogit[c] * pooled[c][k];
            }
            if (ce.reps.empty()) {
                continue;
            }
            for (size_t k = 0; k < r; ++k) {
                dh[k] = dlogit[c] * rp.dense[rp.wc_offset() + k] / double(ce.reps.size());
            }
            std::vector<double> dqc(r, 0.0);
            for (size_t t = 0; t < ce.reps.size(); ++t) {
                push_token_grad(ce, t, dh, grads->embeddings, dqc);
            }
            flush_question_grad(ce, dqc, grads->embeddings);
        }
    }
    total.total = total.span + total.candidate;
    return total;
}

ReaderData
build_reader_data(const RetrievalRun& run, std::span<const QAExample> examples, const Corpus& c, size_t k,
                  int max_answer_len, bool include_header) {
    ReaderData data;
    for (const auto& ex : examples) {
        const Table* gold = ex.gold_table_id ? c.find(*ex.gold_table_id) : nullptr;
        if (gold == nullptr || ex.answers.empty()) {
            ++data.skipped_no_gold;
            continue;
        }
        const auto spans = enumerate_spans(*gold, max_answer_len, include_header);
        if (std::none_of(spans.begin(), spans.end(), [&](const auto& s) { return span_matches(s, ex.answers); })) {
            ++data.skipped_no_span;
            continue;
        }
        ReaderExample re{ex.question, {}, 0, ex.answers};
        bool has_gold = false;
        if (const auto* list = run.find(ex.question.question_id)) {
            for (size_t i = 0; i < std::min(k, list->ranked.size()); ++i) {
                const Table* t = c.find(list->ranked[i].table_id);
                if (t == nullptr) {
                    throw Error(fmt::format("run names table {} which is not in the corpus",
                                            list->ranked[i].table_id));
                }
                if (t == gold) {
                    re.gold = re.candidates.size();
                    has_gold = true;
                }
                re.candidates.push_back(t);
            }
        }
        if (!has_gold) {
            re.gold = re.candidates.size();
            re.candidates.push_back(gold);
        }
        data.examples.push_back(std::move(re));
    }
    return data;
}

ReaderTrainOptions
ReaderTrainOptions::from_config(const Config& cfg) {
    ReaderTrainOptions o;
    o.steps = cfg.reader_steps;
    o.batch = cfg.reader_batch;
    o.learning_rate = cfg.reader_lr;
    o.seed = cfg.seed;
    return o;
}

ReaderTrainResult
train_reader(ReaderParams rp, std::span<const ReaderExample> data, const ReaderTrainOptions& opt) {
    ReaderTrainResult res{std::move(rp), {}};
    if (opt.steps <= 0) {
        return res;
    }
    if (data.empty()) {
        throw Error("reader training data is empty");
    }
    if (opt.batch < 1) {
        throw Error("reader batch must be >= 1");
    }
    const size_t B = std::min(size_t(opt.batch), data.size());
    Rng rng(mix_seed(opt.seed, 13));
    std::vector<size_t> order(data.size());
    std::iota(order.begin(), order.end(), size_t{0});
    size_t cursor = order.size();
    AdamMoments emb_m, dense_m;
    std::vector<ReaderExample> batch;
    for (int step = 0; step < opt.steps; ++step) {
        batch.clear();
        while (batch.size() < B) {
            if (cursor == order.size()) {
                rng.shuffle(order);
                cursor = 0;
            }
            batch.push_back(data[order[cursor++]]);
        }
        ReaderGrads g;
        const auto loss = reader_loss(res.params, batch, &g);
        if (!std::isfinite(loss.total)) {
            throw Error(fmt::format("non-finite reader loss at step {}", step));
        }
        adam_update(res.params.embeddings, g.embeddings, emb_m, opt.learning_rate, step + 1);
        adam_update(res.params.dense, g.dense, dense_m, opt.learning_rate, step + 1);
        res.log.push_back(loss);
    }
    return res;
}

ReaderAnswer
answer(const ReaderParams& rp, const Question& q, std::span<const Table* const> candidates) {
    if (candidates.empty()) {
        throw Error(fmt::format("question {}: no candidate tables", q.question_id));
    }
    ReaderAnswer out;
    struct Scored {
        const Table* table;
        double logit;
        size_t best;
        double best_score;
        std::vector<SpanCandidate> spans;
    };
    std::vector<Scored> scored;
    for (const Table* t : candidates) {
        auto spans = enumerate_spans(*t, rp.max_answer_len, rp.include_header);
        if (spans.empty()) {
            continue;
        }
        const auto enc = encode_for_reader(rp, q.text, *t);
        const auto f = span_forward(rp, enc, spans);
        const size_t best = size_t(std::max_element(f.scores.begin(), f.scores.end()) - f.scores.begin());
        scored.push_back({t, candidate_logit(rp, enc), best, f.scores[best], std::move(spans)});
    }
    if (scored.empty()) {
        return out;
    }
    std::sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
        if (a.logit != b.logit) {
            return a.logit > b.logit;
        }
        return a.table->table_id < b.table->table_id;
    });
    for (const auto& s : scored) {
        out.per_candidate.push_back({s.table->table_id, s.spans[s.best].text, s.logit});
    }
    const auto& top = scored.front();
    out.status = AnswerStatus::kOk;
    out.table_id = top.table->table_id;
    out.text = top.spans[top.best].text;
    out.score = top.logit;
    return out;
}

std::vector<Prediction>
answer_questions(const ReaderParams& rp, const RetrievalRun& run, std::span<const QAExample> examples,
                 const Corpus& c, size_t k, int threads) {
    std::vector<Prediction> preds(examples.size());
    parallel_for(examples.size(), threads, [&](size_t i) {
        const auto& q = examples[i].question;
        auto& p = preds[i];
        p.question_id = q.question_id;
        std::vector<const Table*> cands;
        if (const auto* list = run.find(q.question_id)) {
            for (size_t j = 0; j < std::min(k, list->ranked.size()); ++j) {
                const Table* t = c.find(list->ranked[j].table_id);
                if (t == nullptr) {
                    throw Error(fmt::format("run names table {} which is not in the corpus",
                                            list->ranked[j].table_id));
                }
                cands.push_back(t);
            }
        }
        if (cands.empty()) {
            return;
        }
        auto a = answer(rp, q, cands);
        p.table_id = std::move(a.table_id);
        p.answer = std::move(a.text);
        p.score = a.score;
        p.candidate_answers = std::move(a.per_candidate);
    });
    return preds;
}

void
save_reader(const ReaderParams& rp, const std::filesystem::path& path) {
    BinaryWriter w(path);
    w.put_bytes(kReaderMagic);
    w.put<uint32_t>(kReaderVersion);
    w.put<uint32_t>(uint32_t(rp.r));
    w.put<uint32_t>(uint32_t(rp.hidden));
    w.put<uint32_t>(rp.feature_dims);
    w.put<uint32_t>(uint32_t(rp.max_answer_len));
    w.put<uint32_t>(rp.include_header ? 1u : 0u);
    write_lazy_matrix(w, rp.embeddings);
    write_f32_block(w, rp.dense);
    w.close();
}

ReaderParams
load_reader(const std::filesystem::path& path) {
    BinaryReader r(path);
    r.expect_magic(kReaderMagic);
    if (auto v = r.get<uint32_t>(); v != kReaderVersion) {
        r.fail(fmt::format("unsupported reader file version {}", v));
    }
    ReaderParams rp;
    rp.r = int(r.get<uint32_t>());
    rp.hidden = int(r.get<uint32_t>());
    rp.feature_dims = r.get<uint32_t>();
    rp.max_answer_len = int(r.get<uint32_t>());
    const auto flags = r.get<uint32_t>();
    if (rp.r < 1 || rp.hidden < 1 || rp.feature_dims < 1 || rp.max_answer_len < 1 || flags > 1) {
        r.fail("bad reader header");
    }
    rp.include_header = flags == 1;
    rp.embeddings = read_lazy_matrix(r, size_t(rp.r), rp.feature_dims);
    rp.dense = read_f32_block(r, rp.dense_size());
    if (!r.at_end()) {
        r.fail("trailing bytes");
    }
    return rp;
}

}  // namespace tqa
