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

#include "tqa/params.h"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

namespace tqa {

LazyMatrix::LazyMatrix(size_t dim, uint32_t num_columns, uint64_t seed, double init_scale)
    : dim_(dim), num_columns_(num_columns), seed_(seed), init_scale_(init_scale) {
}

void
LazyMatrix::read_column(uint32_t c, std::span<double> out) const {
    if (auto it = slot_of_.find(c); it != slot_of_.end()) {
        std::copy_n(values_.begin() + static_cast<long>(it->second * dim_), dim_, out.begin());
        return;
    }
    if (init_scale_ == 0.0) {
        std::fill(out.begin(), out.end(), 0.0);
        return;
    }
    Rng rng(mix_seed(seed_, c));
    for (size_t i = 0; i < dim_; ++i) {
        out[i] = rng.uniform(-init_scale_, init_scale_);
    }
}

std::span<double>
LazyMatrix::materialize(uint32_t c) {
    if (c >= num_columns_) {
        throw Error(fmt::format("column {} out of range ({} columns)", c, num_columns_));
    }
    auto it = slot_of_.find(c);
    if (it == slot_of_.end()) {
        std::vector<double> init(dim_);
        read_column(c, init);
        it = slot_of_.emplace(c, static_cast<uint32_t>(columns_.size())).first;
        columns_.push_back(c);
        values_.insert(values_.end(), init.begin(), init.end());
    }
    return {values_.data() + static_cast<size_t>(it->second) * dim_, dim_};
}

void
LazyMatrix::accumulate(const SparseVector& x, std::span<double> out) const {
    std::vector<double> col(dim_);
    for (const auto& [c, v] : x.entries) {
        read_column(c, col);
        for (size_t i = 0; i < dim_; ++i) {
            out[i] += v * col[i];
        }
    }
}

void
adam_update(std::span<double> params, std::span<const double> grad, AdamMoments& moments, double lr,
            int64_t t, const AdamOptions& opt) {
    if (grad.size() != params.size()) {
        throw Error("adam_update: gradient size mismatch");
    }
    moments.resize(params.size());
    const double c1 = 1.0 - std::pow(opt.beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(opt.beta2, static_cast<double>(t));
    for (size_t i = 0; i < params.size(); ++i) {
        double& m = moments.m[i];
        double& v = moments.v[i];
        m = opt.beta1 * m + (1.0 - opt.beta1) * grad[i];
        v = opt.beta2 * v + (1.0 - opt.beta2) * grad[i] * grad[i];
        params[i] -= lr * (m / c1) / (std::sqrt(v / c2) + opt.epsilon);
    }
}

void
adam_update(LazyMatrix& w, const ColumnGrads& grads, AdamMoments& moments, double lr, int64_t t,
            const AdamOptions& opt) {
    for (const auto& [c, g] : grads) {
        w.materialize(c);
    }
    std::vector<double> flat(w.values().size(), 0.0);
    const auto& cols = w.stored_columns();
    const size_t dim = w.dim();
    // Map column -> slot through a scan; stored_columns() is the slot order.
    std::unordered_map<uint32_t, size_t> slot;
    slot.reserve(cols.size());
    for (size_t s = 0; s < cols.size(); ++s) {
        slot.emplace(cols[s], s);
    }
    for (const auto& [c, g] : grads) {
        std::copy(g.begin(), g.end(), flat.begin() + static_cast<long>(slot.at(c) * dim));
    }
    adam_update(w.values(), flat, moments, lr, t, opt);
}

double
LinearSchedule::at(int64_t step) const {
    step -= start_step;
    if (step < warmup_steps) {
        return peak * static_cast<double>(step + 1) / static_cast<double>(warmup_steps);
    }
    const int64_t decay = total_steps - warmup_steps;
    if (decay <= 0) {
        return peak;
    }
    const double frac = static_cast<double>(total_steps - step) / static_cast<double>(decay);
    return peak * std::max(0.0, frac);
}

void
write_f32_block(BinaryWriter& w, std::span<const double> values) {
    for (double v : values) {
        w.put<float>(static_cast<float>(v));
    }
}

std::vector<double>
read_f32_block(BinaryReader& r, size_t n) {
    r.require(n * sizeof(float), "truncated float block");
    std::vector<double> out(n);
    for (size_t i = 0; i < n; ++i) {
        const auto offset = r.offset();
        const float f = r.get<float>();
        if (!std::isfinite(f)) {
            r.fail_at(offset, "non-finite parameter");
        }
        out[i] = f;
    }
    return out;
}

void
write_lazy_matrix(BinaryWriter& w, const LazyMatrix& m) {
    w.put<uint64_t>(m.seed());
    w.put<double>(m.init_scale());
    std::vector<uint32_t> order = m.stored_columns();
    std::sort(order.begin(), order.end());
    w.put<uint32_t>(static_cast<uint32_t>(order.size()));
    std::vector<double> col(m.dim());
    for (auto c : order) {
        w.put<uint32_t>(c);
        m.read_column(c, col);
        write_f32_block(w, col);
    }
}

LazyMatrix
read_lazy_matrix(BinaryReader& r, size_t expected_dim, uint32_t expected_columns) {
    const auto seed = r.get<uint64_t>();
    const auto scale = r.get<double>();
    if (!std::isfinite(scale) || scale < 0) {
        r.fail("invalid init scale");
    }
    LazyMatrix m(expected_dim, expected_columns, seed, scale);
    const auto stored = r.get<uint32_t>();
    if (stored > expected_columns) {
        r.fail("more stored columns than the feature space holds");
    }
    uint32_t prev = 0;
    for (uint32_t i = 0; i < stored; ++i) {
        const auto c = r.get<uint32_t>();
        if (c >= expected_columns || (i > 0 && c <= prev)) {
            r.fail(fmt::format("column index {} out of order or range", c));
        }
        prev = c;
        auto values = read_f32_block(r, expected_dim);
        auto dst = m.materialize(c);
        std::copy(values.begin(), values.end(), dst.begin());
    }
    return m;
}

}  // namespace tqa
