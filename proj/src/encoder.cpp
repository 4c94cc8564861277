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

#include "tqa/encoder.h"

#include <fmt/format.h>

#include <cmath>

namespace tqa {

namespace {
constexpr uint32_t kFlagUseStructure = 1u << 0;
constexpr uint32_t kFlagSchemaOnly = 1u << 1;
}  // namespace

Embedding
Tower::project(const SparseVector& x) const {
    Embedding h = bias;
    weights.accumulate(x, h);
    return h;
}

EncoderOptions
EncoderOptions::from_config(const Config& cfg) {
    EncoderOptions o;
    o.d = cfg.embed_dim;
    o.feature_dims = static_cast<uint32_t>(cfg.feature_dims);
    o.use_structure = cfg.use_structure;
    o.schema_only = cfg.schema_only;
    o.seed = cfg.seed;
    return o;
}

EncoderParams
make_encoder(const EncoderOptions& opt) {
    if (opt.d <= 0 || opt.feature_dims < 1024) {
        throw Error("encoder needs d > 0 and feature_dims >= 1024");
    }
    const double scale = opt.init_scale >= 0 ? opt.init_scale : 1.0 / std::sqrt(double(opt.feature_dims));
    EncoderParams p;
    p.d = opt.d;
    p.feature_dims = opt.feature_dims;
    p.use_structure = opt.use_structure;
    p.schema_only = opt.schema_only;
    const auto d = static_cast<size_t>(opt.d);
    p.question_tower = {LazyMatrix(d, opt.feature_dims, mix_seed(opt.seed, 1), scale), std::vector<double>(d, 0.0)};
    p.table_tower = {LazyMatrix(d, opt.feature_dims, mix_seed(opt.seed, 2), scale), std::vector<double>(d, 0.0)};
    return p;
}

SparseVector
question_features(const EncoderParams& p, std::string_view text) {
    auto toks = question_tokens(text);
    return hash_features(toks, p.feature_dims, false);
}

SparseVector
table_features(const EncoderParams& p, const Table& t) {
    auto toks = flatten_table(t, p.schema_only ? FlattenMode::kSchemaOnly : FlattenMode::kFull);
    return hash_features(toks, p.feature_dims, p.use_structure);
}

Embedding
encode_text(const EncoderParams& p, std::string_view text) {
    return p.question_tower.project(question_features(p, text));
}

Embedding
encode_question(const EncoderParams& p, const Question& q) {
    return encode_text(p, q.text);
}

Embedding
encode_table(const EncoderParams& p, const Table& t) {
    return p.table_tower.project(table_features(p, t));
}

double
ret_score(std::span<const double> h_q, std::span<const double> h_t) {
    if (h_q.size() != h_t.size()) {
        throw Error(fmt::format("ret_score: embedding sizes differ ({} vs {})", h_q.size(), h_t.size()));
    }
    double s = 0.0;
    for (size_t i = 0; i < h_q.size(); ++i) {
        s += h_q[i] * h_t[i];
    }
    return s;
}

void
save_checkpoint(const EncoderParams& p, const std::filesystem::path& path) {
    BinaryWriter w(path);
    w.put_bytes(kCheckpointMagic);
    w.put<uint32_t>(kCheckpointVersion);
    w.put<uint32_t>(static_cast<uint32_t>(p.d));
    w.put<uint32_t>(p.feature_dims);
    uint32_t flags = 0;
    flags |= p.use_structure ? kFlagUseStructure : 0;
    flags |= p.schema_only ? kFlagSchemaOnly : 0;
    w.put<uint32_t>(flags);
    for (const Tower* t : {&p.question_tower, &p.table_tower}) {
        write_lazy_matrix(w, t->weights);
        write_f32_block(w, t->bias);
    }
    w.close();
}

EncoderParams
load_checkpoint(const std::filesystem::path& path) {
    BinaryReader r(path);
    r.expect_magic(kCheckpointMagic);
    if (auto v = r.get<uint32_t>(); v != kCheckpointVersion) {
        r.fail(fmt::format("unsupported checkpoint version {}", v));
    }
    EncoderParams p;
    const auto d = r.get<uint32_t>();
    const auto dims = r.get<uint32_t>();
    if (d == 0 || d > (1u << 16) || dims < 1024) {
        r.fail(fmt::format("implausible shape d={} feature_dims={}", d, dims));
    }
    const auto flags = r.get<uint32_t>();
    if (flags & ~(kFlagUseStructure | kFlagSchemaOnly)) {
        r.fail("unknown flag bits");
    }
    p.d = static_cast<int>(d);
    p.feature_dims = dims;
    p.use_structure = flags & kFlagUseStructure;
    p.schema_only = flags & kFlagSchemaOnly;
    for (Tower* t : {&p.question_tower, &p.table_tower}) {
        t->weights = read_lazy_matrix(r, d, dims);
        t->bias = read_f32_block(r, d);
    }
    if (!r.at_end()) {
        r.fail("trailing bytes after checkpoint");
    }
    return p;
}

}  // namespace tqa
