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
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "tqa/core.h"

namespace tqa {

struct TokenSeq {
    std::vector<std::string> tokens;
    /// [begin, end) byte offsets of each token in the source text.
    std::vector<std::pair<size_t, size_t>> spans;

    size_t
    size() const {
        return tokens.size();
    }
};

/// Lowercases and splits UTF-8 text on whitespace and punctuation, which is
/// dropped. Letters and digits of any script are kept.
TokenSeq
tokenize(std::string_view text);

/// Convenience: only the token strings.
std::vector<std::string>
tokenize_words(std::string_view text);

/// Same case folding as the tokenizer, applied to the whole string.
std::string
lowercase_utf8(std::string_view text);

enum class Segment : uint8_t { kQuestion, kTitle, kSection, kCaption, kHeader, kCell };

std::string_view
segment_name(Segment s);

struct StructuredToken {
    std::string token;
    Segment segment = Segment::kQuestion;
    int row_idx = 0;  // 1-based for cells, 0 otherwise
    int col_idx = 0;  // 1-based for header and cells, 0 otherwise

    bool
    operator==(const StructuredToken&) const = default;
};

enum class FlattenMode { kFull, kSchemaOnly };

/// Title, section, caption, header, then cells in row-major order.
/// kSchemaOnly keeps only title, section and header tokens.
std::vector<StructuredToken>
flatten_table(const Table& t, FlattenMode mode);

std::vector<StructuredToken>
question_tokens(std::string_view text);

/// Sorted (index, value) pairs; indices strictly increasing, no zeros.
struct SparseVector {
    std::vector<std::pair<uint32_t, double>> entries;

    bool
    empty() const {
        return entries.empty();
    }

    size_t
    size() const {
        return entries.size();
    }

    double
    norm() const;

    /// Builds a vector from unsorted (index, value) contributions, summing duplicates.
    static SparseVector
    from_counts(std::vector<std::pair<uint32_t, double>> contributions);

    void
    l2_normalize();

    bool
    operator==(const SparseVector&) const = default;
};

double
dot(const SparseVector& a, const SparseVector& b);

/// Token -> id in first-seen order.
class Vocabulary {
public:
    uint32_t
    intern(const std::string& token);

    std::optional<uint32_t>
    lookup(const std::string& token) const;

    size_t
    size() const {
        return ids_.size();
    }

private:
    std::unordered_map<std::string, uint32_t> ids_;
};

/// l2-normalized token counts over `vocab` (unseen tokens are interned).
SparseVector
unigram_vector(std::span<const std::string> tokens, Vocabulary& vocab);

constexpr int kDefaultFeatureDims = 1 << 18;

/// Hashed feature indices a single token contributes: the bare token, and
/// with use_structure also token+segment and (for header/cell) token+column.
void
token_feature_ids(const StructuredToken& tok, uint32_t dims, bool use_structure,
                  std::vector<uint32_t>& out);

/// l2-normalized bag of hashed features (murmur64, kFeatureHashSeed).
SparseVector
hash_features(std::span<const StructuredToken> tokens, uint32_t dims, bool use_structure);

}  // namespace tqa
