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

#include <cstdint>
#include <map>
#include <span>
#include <unordered_map>
#include <vector>

#include "tqa/textproc.h"
#include "tqa/util.h"

namespace tqa {

/// Dense row-major matrix of doubles.
struct Matrix {
    size_t rows = 0;
    size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(size_t r, size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {
    }

    double&
    operator()(size_t r, size_t c) {
        return data[r * cols + c];
    }

    double
    operator()(size_t r, size_t c) const {
        return data[r * cols + c];
    }

    std::span<double>
    row(size_t r) {
        return {data.data() + r * cols, cols};
    }

    std::span<const double>
    row(size_t r) const {
        return {data.data() + r * cols, cols};
    }

    bool
    operator==(const Matrix&) const = default;
};

/// A (dim x num_columns) matrix over a hashed feature space where only
/// columns that have been written are stored. An unstored column reads as
/// its seeded initial value: i.i.d. uniform in [-init_scale, init_scale]
/// drawn from Rng(mix_seed(seed, column)).
class LazyMatrix {
public:
    LazyMatrix() = default;
    LazyMatrix(size_t dim, uint32_t num_columns, uint64_t seed, double init_scale);

    size_t
    dim() const {
        return dim_;
    }

    uint32_t
    num_columns() const {
        return num_columns_;
    }

    uint64_t
    seed() const {
        return seed_;
    }

    double
    init_scale() const {
        return init_scale_;
    }

    /// Writes column `c` (stored or initial) into out (size dim).
    void
    read_column(uint32_t c, std::span<double> out) const;

    /// Stores column `c` if needed. The span is invalidated by the next
    /// materialize() call.
    std::span<double>
    materialize(uint32_t c);

    bool
    is_stored(uint32_t c) const {
        return slot_of_.contains(c);
    }

    /// out += sum_k x_k * column(k)
    void
    accumulate(const SparseVector& x, std::span<double> out) const;

    /// Stored columns in storage order; values() is laid out to match.
    const std::vector<uint32_t>&
    stored_columns() const {
        return columns_;
    }

    std::vector<double>&
    values() {
        return values_;
    }

    const std::vector<double>&
    values() const {
        return values_;
    }

    bool
    operator==(const LazyMatrix&) const = default;

private:
    size_t dim_ = 0;
    uint32_t num_columns_ = 0;
    uint64_t seed_ = 0;
    double init_scale_ = 0.0;
    std::unordered_map<uint32_t, uint32_t> slot_of_;
    std::vector<uint32_t> columns_;
    std::vector<double> values_;
};

/// Column gradients keyed by column index (ordered for deterministic application).
using ColumnGrads = std::map<uint32_t, std::vector<double>>;

struct AdamOptions {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// First and second moments for one flat parameter block; grows with it.
struct AdamMoments {
    std::vector<double> m;
    std::vector<double> v;

    void
    resize(size_t n) {
        m.resize(n, 0.0);
        v.resize(n, 0.0);
    }

    bool
    operator==(const AdamMoments&) const = default;
};

/// One bias-corrected Adam update with step number t >= 1.
void
adam_update(std::span<double> params, std::span<const double> grad, AdamMoments& moments, double lr,
            int64_t t, const AdamOptions& opt = {});

/// Applies column gradients to a lazy matrix: materializes the touched
/// columns, then runs Adam over every stored column.
void
adam_update(LazyMatrix& w, const ColumnGrads& grads, AdamMoments& moments, double lr, int64_t t,
            const AdamOptions& opt = {});

/// Linear warm-up to `peak` over warmup_steps, then linear decay to zero at
/// total_steps. Steps are counted from start_step.
struct LinearSchedule {
    double peak = 1e-3;
    int64_t warmup_steps = 0;
    int64_t total_steps = 1;
    int64_t start_step = 0;

    /// Rate for the (0-based) step about to be taken.
    double
    at(int64_t step) const;
};

void
write_lazy_matrix(BinaryWriter& w, const LazyMatrix& m);

LazyMatrix
read_lazy_matrix(BinaryReader& r, size_t expected_dim, uint32_t expected_columns);

void
write_f32_block(BinaryWriter& w, std::span<const double> values);

std::vector<double>
read_f32_block(BinaryReader& r, size_t n);

}  // namespace tqa
