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

#include "tqa/textproc.h"

#include <algorithm>
#include <cmath>

namespace tqa {

namespace {

struct CodePoint {
    char32_t value;
    size_t length;  // bytes consumed; value is 0xFFFD on malformed input
};

CodePoint
decode_utf8(std::string_view s, size_t i) {
    const auto b0 = static_cast<unsigned char>(s[i]);
    if (b0 < 0x80) {
        return {b0, 1};
    }
    size_t len = 0;
    char32_t cp = 0;
    if ((b0 & 0xE0) == 0xC0) {
        len = 2;
        cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
        len = 3;
        cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
        len = 4;
        cp = b0 & 0x07;
    } else {
        return {0xFFFD, 1};
    }
    if (i + len > s.size()) {
        return {0xFFFD, 1};
    }
    for (size_t k = 1; k < len; ++k) {
        const auto b = static_cast<unsigned char>(s[i + k]);
        if ((b & 0xC0) != 0x80) {
            return {0xFFFD, 1};
        }
        cp = (cp << 6) | (b & 0x3F);
    }
    return {cp, len};
}

void
encode_utf8(char32_t cp, std::string& out) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

bool
in(char32_t cp, char32_t lo, char32_t hi) {
    return cp >= lo && cp <= hi;
}

bool
is_word_char(char32_t cp) {
    if (cp < 0x80) {
        return (cp >= '0' && cp <= '9') || (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z');
    }
    if (cp == 0xFFFD || cp == 0xFEFF || cp == 0xD7 || cp == 0xF7) {
        return false;
    }
    // Latin-1 punctuation and symbols, general punctuation, currency, arrows
    // through misc symbols, CJK punctuation, fullwidth ASCII punctuation.
    return !(in(cp, 0x80, 0xBF) || in(cp, 0x2000, 0x206F) || in(cp, 0x20A0, 0x20CF) ||
             in(cp, 0x2190, 0x2BFF) || in(cp, 0x3000, 0x303F) || in(cp, 0xFE30, 0xFE4F) ||
             in(cp, 0xFF00, 0xFF0F) || in(cp, 0xFF1A, 0xFF20) || in(cp, 0xFF3B, 0xFF40) ||
             in(cp, 0xFF5B, 0xFF65));
}

char32_t
to_lower(char32_t cp) {
    if (cp >= 'A' && cp <= 'Z') {
        return cp + 32;
    }
    if (cp < 0xC0) {
        return cp;
    }
    if (in(cp, 0xC0, 0xDE) && cp != 0xD7) {
        return cp + 32;
    }
    if ((in(cp, 0x100, 0x137) || in(cp, 0x14A, 0x177)) && cp % 2 == 0) {
        return cp + 1;
    }
    if ((in(cp, 0x139, 0x148) || in(cp, 0x179, 0x17E)) && cp % 2 == 1) {
        return cp + 1;
    }
    if (in(cp, 0x391, 0x3A9) && cp != 0x3A2) {
        return cp + 32;
    }
    if (in(cp, 0x410, 0x42F)) {
        return cp + 32;
    }
    if (in(cp, 0x400, 0x40F)) {
        return cp + 80;
    }
    return cp;
}

}  // namespace

TokenSeq
tokenize(std::string_view text) {
    TokenSeq out;
    std::string current;
    size_t start = 0;
    size_t i = 0;
    auto flush = [&](size_t end) {
        if (!current.empty()) {
            out.tokens.push_back(std::move(current));
            out.spans.emplace_back(start, end);
            current.clear();
        }
    };
    while (i < text.size()) {
        auto [cp, len] = decode_utf8(text, i);
        if (is_word_char(cp)) {
            if (current.empty()) {
                start = i;
            }
            encode_utf8(to_lower(cp), current);
        } else {
            flush(i);
        }
        i += len;
    }
    flush(text.size());
    return out;
}

std::string
lowercase_utf8(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    size_t i = 0;
    while (i < text.size()) {
        auto [cp, len] = decode_utf8(text, i);
        encode_utf8(to_lower(cp), out);
        i += len;
    }
    return out;
}

std::vector<std::string>
tokenize_words(std::string_view text) {
    return tokenize(text).tokens;
}

std::string_view
segment_name(Segment s) {
    switch (s) {
        case Segment::kQuestion:
            return "question";
        case Segment::kTitle:
            return "title";
        case Segment::kSection:
            return "section";
        case Segment::kCaption:
            return "caption";
        case Segment::kHeader:
            return "header";
        case Segment::kCell:
            return "cell";
    }
    return "unknown";
}

namespace {

void
append_tokens(std::string_view text, Segment seg, int row, int col, std::vector<StructuredToken>& out) {
    for (auto& tok : tokenize(text).tokens) {
        out.push_back({std::move(tok), seg, row, col});
    }
}

}  // namespace

std::vector<StructuredToken>
flatten_table(const Table& t, FlattenMode mode) {
    std::vector<StructuredToken> out;
    append_tokens(t.page_title, Segment::kTitle, 0, 0, out);
    if (t.section_title) {
        append_tokens(*t.section_title, Segment::kSection, 0, 0, out);
    }
    if (mode == FlattenMode::kFull && t.caption) {
        append_tokens(*t.caption, Segment::kCaption, 0, 0, out);
    }
    for (size_t c = 0; c < t.header.size(); ++c) {
        append_tokens(t.header[c], Segment::kHeader, 0, static_cast<int>(c + 1), out);
    }
    if (mode == FlattenMode::kFull) {
        for (size_t r = 0; r < t.rows.size(); ++r) {
            for (size_t c = 0; c < t.rows[r].size(); ++c) {
                append_tokens(t.rows[r][c], Segment::kCell, static_cast<int>(r + 1),
                              static_cast<int>(c + 1), out);
            }
        }
    }
    return out;
}

std::vector<StructuredToken>
question_tokens(std::string_view text) {
    std::vector<StructuredToken> out;
    append_tokens(text, Segment::kQuestion, 0, 0, out);
    return out;
}

double
SparseVector::norm() const {
    double s = 0.0;
    for (const auto& [i, v] : entries) {
        s += v * v;
    }
    return std::sqrt(s);
}

SparseVector
SparseVector::from_counts(std::vector<std::pair<uint32_t, double>> contributions) {
    std::sort(contributions.begin(), contributions.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    SparseVector out;
    for (const auto& [idx, val] : contributions) {
        if (!out.entries.empty() && out.entries.back().first == idx) {
            out.entries.back().second += val;
        } else {
            out.entries.emplace_back(idx, val);
        }
    }
    std::erase_if(out.entries, [](const auto& e) { return e.second == 0.0; });
    return out;
}

void
SparseVector::l2_normalize() {
    const double n = norm();
    if (n == 0.0) {
        return;
    }
    for (auto& e : entries) {
        e.second /= n;
    }
}

double
dot(const SparseVector& a, const SparseVector& b) {
    double s = 0.0;
    auto ia = a.entries.begin();
    auto ib = b.entries.begin();
    while (ia != a.entries.end() && ib != b.entries.end()) {
        if (ia->first < ib->first) {
            ++ia;
        } else if (ib->first < ia->first) {
            ++ib;
        } else {
            s += ia->second * ib->second;
            ++ia;
            ++ib;
        }
    }
    return s;
}

uint32_t
Vocabulary::intern(const std::string& token) {
    auto [it, inserted] = ids_.emplace(token, static_cast<uint32_t>(ids_.size()));
    return it->second;
}

std::optional<uint32_t>
Vocabulary::lookup(const std::string& token) const {
    auto it = ids_.find(token);
    if (it == ids_.end()) {
        return std::nullopt;
    }
    return it->second;
}

SparseVector
unigram_vector(std::span<const std::string> tokens, Vocabulary& vocab) {
    std::vector<std::pair<uint32_t, double>> counts;
    counts.reserve(tokens.size());
    for (const auto& tok : tokens) {
        counts.emplace_back(vocab.intern(tok), 1.0);
    }
    auto v = SparseVector::from_counts(std::move(counts));
    v.l2_normalize();
    return v;
}

void
token_feature_ids(const StructuredToken& tok, uint32_t dims, bool use_structure,
                  std::vector<uint32_t>& out) {
    auto h = [&](std::string_view key) {
        return static_cast<uint32_t>(murmur64(key, kFeatureHashSeed) % dims);
    };
    out.push_back(h(tok.token));
    if (!use_structure) {
        return;
    }
    std::string key = tok.token;
    key += "\x1fseg:";
    key += segment_name(tok.segment);
    out.push_back(h(key));
    if (tok.col_idx >= 1) {
        key = tok.token;
        key += "\x1f";
        key += "col:";
        key += std::to_string(tok.col_idx);
        out.push_back(h(key));
    }
}

SparseVector
hash_features(std::span<const StructuredToken> tokens, uint32_t dims, bool use_structure) {
    std::vector<uint32_t> ids;
    ids.reserve(tokens.size() * 3);
    for (const auto& tok : tokens) {
        token_feature_ids(tok, dims, use_structure, ids);
    }
    std::vector<std::pair<uint32_t, double>> counts;
    counts.reserve(ids.size());
    for (auto id : ids) {
        counts.emplace_back(id, 1.0);
    }
    auto v = SparseVector::from_counts(std::move(counts));
    v.l2_normalize();
    return v;
}

}  // namespace tqa
