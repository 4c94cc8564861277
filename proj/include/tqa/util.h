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
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

namespace tqa {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised by binary readers; carries the byte offset where decoding failed.
class FormatError : public Error {
public:
    FormatError(const std::string& file, uint64_t offset, const std::string& what);

    uint64_t
    offset() const {
        return offset_;
    }

private:
    uint64_t offset_;
};

/// MurmurHash64A (Austin Appleby). Frozen: feature spaces and checkpoints depend on it.
uint64_t
murmur64(std::string_view data, uint64_t seed);

constexpr uint64_t kFeatureHashSeed = 0x7461626c65716131ULL;  // "tableqa1"

std::string
hex64(uint64_t v);

/// Content hash of a whole file (murmur64 over its bytes), hex encoded.
std::string
hash_file(const std::filesystem::path& path);

std::string
read_file(const std::filesystem::path& path);

/// Seeded generator with platform-independent derived distributions
/// (std::uniform_*_distribution is implementation defined).
class Rng {
public:
    explicit Rng(uint64_t seed) : engine_(seed) {
    }

    uint64_t
    next() {
        return engine_();
    }

    /// Uniform integer in [0, n).
    uint64_t
    below(uint64_t n);

    /// Uniform real in [0, 1).
    double
    uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double
    uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform();
    }

    template <typename T>
    void
    shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[below(i)]);
        }
    }

private:
    std::mt19937_64 engine_;
};

/// Mixes several integers into one seed (splitmix64 finalizer).
uint64_t
mix_seed(uint64_t a, uint64_t b, uint64_t c = 0);

/// Runs fn(i) for i in [0, n) on up to `threads` workers. Each index is
/// visited exactly once; fn must only write state owned by index i.
void
parallel_for(size_t n, int threads, const std::function<void(size_t)>& fn);

/// Little-endian binary writer.
class BinaryWriter {
public:
    explicit BinaryWriter(const std::filesystem::path& path);

    template <typename T>
    void
    put(T v) {
        static_assert(std::is_arithmetic_v<T>);
        out_.write(reinterpret_cast<const char*>(&v), sizeof(T));
    }

    void
    put_bytes(std::string_view bytes) {
        out_.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    }

    void
    put_string(std::string_view s) {
        put<uint32_t>(static_cast<uint32_t>(s.size()));
        put_bytes(s);
    }

    void
    close();

private:
    std::filesystem::path path_;
    std::ofstream out_;
};

/// Little-endian binary reader over an in-memory file image. Every failure
/// is a FormatError naming the offending offset.
class BinaryReader {
public:
    explicit BinaryReader(const std::filesystem::path& path);

    template <typename T>
    T
    get() {
        static_assert(std::is_arithmetic_v<T>);
        require(sizeof(T), "truncated value");
        T v;
        std::memcpy(&v, data_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }

    std::string
    get_bytes(size_t n);

    std::string
    get_string();

    void
    expect_magic(std::string_view magic);

    uint64_t
    offset() const {
        return pos_;
    }

    bool
    at_end() const {
        return pos_ == data_.size();
    }

    [[noreturn]] void
    fail(const std::string& what) const;

    [[noreturn]] void
    fail_at(uint64_t offset, const std::string& what) const;

    void
    require(size_t n, const char* what) const;

private:
    std::string file_;
    std::string data_;
    size_t pos_ = 0;
};

}  // namespace tqa
