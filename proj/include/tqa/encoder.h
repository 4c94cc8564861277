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
#include <vector>

#include "tqa/core.h"
#include "tqa/params.h"
#include "tqa/textproc.h"

namespace tqa {

using Embedding = std::vector<double>;

/// One tower: h = W x + bias over l2-normalized hashed features x.
struct Tower {
    LazyMatrix weights;
    std::vector<double> bias;

    Embedding
    project(const SparseVector& x) const;

    bool
    operator==(const Tower&) const = default;
};

/// Two independent towers. The question tower sees bare token features; the
/// table tower additionally sees segment and column features when
/// use_structure is set, and only title/section/header when schema_only is.
struct EncoderParams {
    int d = kReferenceEmbedDim;
    uint32_t feature_dims = kDefaultFeatureDims;
    bool use_structure = true;
    bool schema_only = false;
    Tower question_tower;
    Tower table_tower;

    bool
    operator==(const EncoderParams&) const = default;
};

struct EncoderOptions {
    int d = kReferenceEmbedDim;
    uint32_t feature_dims = kDefaultFeatureDims;
    bool use_structure = true;
    bool schema_only = false;
    uint64_t seed = 42;
    /// Weight init half-width; negative means 1/sqrt(feature_dims). Biases start at zero.
    double init_scale = -1.0;

    static EncoderOptions
    from_config(const Config& cfg);
};

EncoderParams
make_encoder(const EncoderOptions& opt);

SparseVector
question_features(const EncoderParams& p, std::string_view text);

SparseVector
table_features(const EncoderParams& p, const Table& t);

Embedding
encode_question(const EncoderParams& p, const Question& q);

Embedding
encode_text(const EncoderParams& p, std::string_view text);

Embedding
encode_table(const EncoderParams& p, const Table& t);

/// Inner product; throws on length mismatch.
double
ret_score(std::span<const double> h_q, std::span<const double> h_t);

inline constexpr std::string_view kCheckpointMagic = "TQENCODR";
inline constexpr uint32_t kCheckpointVersion = 1;

void
save_checkpoint(const EncoderParams& p, const std::filesystem::path& path);

/// Throws FormatError (with byte offset) on any malformed input.
EncoderParams
load_checkpoint(const std::filesystem::path& path);

}  // namespace tqa
