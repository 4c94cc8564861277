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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tqa/core.h"
#include "tqa/encoder.h"
#include "tqa/params.h"

namespace tqa {

/// Logit assigned to score entries that must not compete (absent or
/// colliding hard negatives). Finite so that softmax stays well defined.
inline constexpr double kMaskedLogit = -1e9;

struct ScoreBatch {
    Matrix S;                     // S(i, j) = score(q_i, T_j); gold on the diagonal
    std::optional<Matrix> S_hard;  // S_hard(i, j) = score(q_i, N_j)
};

struct LossResult {
    double loss = 0.0;
    Matrix grad_S;
    Matrix grad_S_hard;  // empty for the in-batch loss
};

/// Mean row-wise softmax cross entropy with the diagonal as labels.
LossResult
in_batch_loss(const ScoreBatch& sb);

/// Each question's logits are [S(i, :) | S_hard(i, :)] (length 2B) with label i.
LossResult
hard_negative_loss(const ScoreBatch& sb);

/// Row-wise softmax with max subtraction.
std::vector<double>
softmax(std::span<const double> logits);

/// One training item: a question (or ICT span) and its gold table, plus an
/// optional mined hard negative. Tables are corpus indices.
struct TrainExample {
    std::string text;
    size_t table = 0;
    std::optional<size_t> hard_negative;
};

/// Featurized batch. negatives is empty when no hard negatives are used;
/// otherwise it has one optional entry per question.
struct FeatureBatch {
    std::vector<SparseVector> questions;
    std::vector<SparseVector> tables;
    std::vector<std::optional<SparseVector>> negatives;
    /// hard_masked(i, j) != 0 when N_j must not compete for question i.
    Matrix hard_masked;
};

/// Builds features for a batch of corpus-indexed examples. Rejects duplicate
/// gold tables. With dropout > 0 each feature entry is zeroed with that
/// probability and survivors are rescaled by 1/(1 - dropout).
FeatureBatch
featurize_batch(const EncoderParams& p, const Corpus& c, std::span<const TrainExample> batch,
                bool with_hard_negatives, double dropout = 0.0, Rng* rng = nullptr);

ScoreBatch
batch_scores(const EncoderParams& p, const FeatureBatch& fb);

/// Convenience form over explicit tables; hard_negs (if given) has one
/// entry per question, nullptr meaning none.
ScoreBatch
batch_scores(const EncoderParams& p, std::span<const Question> questions, std::span<const Table> tables,
             std::span<const Table* const> hard_negs = {});

struct EncoderGrads {
    ColumnGrads question_weights;
    std::vector<double> question_bias;
    ColumnGrads table_weights;
    std::vector<double> table_bias;
};

/// Loss of the batch and its exact gradient with respect to both towers.
double
loss_and_gradients(const EncoderParams& p, const FeatureBatch& fb, EncoderGrads* grads);

struct TrainState {
    EncoderParams params;
    AdamMoments question_weights;
    AdamMoments question_bias;
    AdamMoments table_weights;
    AdamMoments table_bias;
    int64_t step = 0;
    double best_recall = -1.0;
    double best_mrr = -1.0;  // breaks ties in best_recall
    int evals_since_improvement = 0;

    explicit TrainState(EncoderParams p = {}) : params(std::move(p)) {
    }

    bool
    operator==(const TrainState&) const = default;
};

/// One Adam step on a featurized batch; returns the batch loss.
/// Throws if any gradient entry is non-finite.
double
backprop_and_step(TrainState& st, const FeatureBatch& fb, const LinearSchedule& schedule,
                  const AdamOptions& opt = {});

/// Up to per_table contiguous windows of 3-12 tokens from the title, section
/// title and caption, each drawn from a uniformly chosen non-empty field.
/// Identical windows from the same table are emitted once.
std::vector<TextTablePair>
generate_ict_pairs(const Corpus& c, int per_table, uint64_t seed);

struct TrainOptions {
    int batch_size = 16;
    int64_t max_steps = 2000;
    double learning_rate = 1e-3;
    double warmup_frac = 0.1;
    int64_t eval_every = 100;
    int patience = 5;
    double dropout = 0.2;
    size_t eval_k = 10;
    uint64_t seed = 42;
    int threads = 1;

    static TrainOptions
    from_config(const Config& cfg);
};

/// Early-stopping evaluation: recall@eval_k over the dev tables only.
struct DevSet {
    Corpus tables;
    std::vector<QAExample> examples;
};

struct TrainLogRow {
    int64_t step = 0;
    double loss = 0.0;
    std::optional<double> dev_recall;
    std::optional<double> dev_mrr;
};

struct TrainResult {
    TrainState state;  // best checkpoint by dev recall (last state without a dev set)
    int64_t best_step = 0;
    std::vector<TrainLogRow> log;
};

/// Mini-batch training with per-epoch reshuffling. Hard negatives are used
/// when any example carries one. Throws if the data holds fewer distinct
/// gold tables than the batch size.
///
/// With a dev set, evaluation runs before the first step, every eval_every
/// steps and at the last step. An evaluation improves on the best so far if
/// its recall is higher, or equal with a higher MRR over the same depth. The
/// returned state is the first evaluation that was never improved on;
/// training stops after `patience` evaluations in a row without improvement.
TrainResult
train(TrainState init, const Corpus& c, std::span<const TrainExample> data, const DevSet* dev,
      const TrainOptions& opt);

void
save_train_log(const std::vector<TrainLogRow>& log, const std::filesystem::path& path);

}  // namespace tqa
