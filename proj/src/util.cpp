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

#include "tqa/util.h"

#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <mutex>
#include <sstream>
#include <thread>

namespace tqa {

FormatError::FormatError(const std::string& file, uint64_t offset, const std::string& what)
    : Error(fmt::format("{}: {} at byte offset {}", file, what, offset)), offset_(offset) {
}

uint64_t
murmur64(std::string_view data, uint64_t seed) {
    constexpr uint64_t m = 0xc6a4a7935bd1e995ULL;
    constexpr int r = 47;
    const size_t len = data.size();
    uint64_t h = seed ^ (len * m);

    const char* p = data.data();
    const size_t blocks = len / 8;
    for (size_t i = 0; i < blocks; ++i) {
        uint64_t k;
        std::memcpy(&k, p + i * 8, 8);
        k *= m;
        k ^= k >> r;
        k *= m;
        h ^= k;
        h *= m;
    }

    const auto* tail = reinterpret_cast<const unsigned char*>(p + blocks * 8);
    switch (len & 7) {
        case 7:
            h ^= uint64_t(tail[6]) << 48;
            [[fallthrough]];
        case 6:
            h ^= uint64_t(tail[5]) << 40;
            [[fallthrough]];
        case 5:
            h ^= uint64_t(tail[4]) << 32;
            [[fallthrough]];
        case 4:
            h ^= uint64_t(tail[3]) << 24;
            [[fallthrough]];
        case 3:
            h ^= uint64_t(tail[2]) << 16;
            [[fallthrough]];
        case 2:
            h ^= uint64_t(tail[1]) << 8;
            [[fallthrough]];
        case 1:
            h ^= uint64_t(tail[0]);
            h *= m;
    }

    h ^= h >> r;
    h *= m;
    h ^= h >> r;
    return h;
}

std::string
hex64(uint64_t v) {
    return fmt::format("{:016x}", v);
}

std::string
read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(fmt::format("cannot open {}", path.string()));
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string
hash_file(const std::filesystem::path& path) {
    return hex64(murmur64(read_file(path), kFeatureHashSeed));
}

uint64_t
Rng::below(uint64_t n) {
    if (n == 0) {
        throw Error("Rng::below(0)");
    }
    // Rejection sampling keeps the result unbiased.
    const uint64_t limit = UINT64_MAX - (UINT64_MAX % n);
    uint64_t x;
    do {
        x = engine_();
    } while (x >= limit);
    return x % n;
}

uint64_t
mix_seed(uint64_t a, uint64_t b, uint64_t c) {
    auto fin = [](uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    };
    return fin(fin(fin(a) ^ b) ^ c);
}

void
parallel_for(size_t n, int threads, const std::function<void(size_t)>& fn) {
    const size_t workers = std::min<size_t>(n, static_cast<size_t>(std::max(1, threads)));
    if (workers <= 1) {
        for (size_t i = 0; i < n; ++i) {
            fn(i);
        }
        return;
    }
    std::atomic<size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (size_t i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) {
                        error = std::current_exception();
                    }
                }
            }
        });
    }
    for (auto& t : pool) {
        t.join();
    }
    if (error) {
        std::rethrow_exception(error);
    }
}

BinaryWriter::BinaryWriter(const std::filesystem::path& path)
    : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) {
        throw Error(fmt::format("cannot write {}", path.string()));
    }
}

void
BinaryWriter::close() {
    out_.close();
    if (!out_) {
        throw Error(fmt::format("write failed for {}", path_.string()));
    }
}

BinaryReader::BinaryReader(const std::filesystem::path& path)
    : file_(path.string()), data_(read_file(path)) {
}

void
BinaryReader::fail(const std::string& what) const {
    throw FormatError(file_, pos_, what);
}

void
BinaryReader::fail_at(uint64_t offset, const std::string& what) const {
    throw FormatError(file_, offset, what);
}

void
BinaryReader::require(size_t n, const char* what) const {
    if (data_.size() - pos_ < n) {
        fail(what);
    }
}

std::string
BinaryReader::get_bytes(size_t n) {
    require(n, "truncated block");
    std::string out = data_.substr(pos_, n);
    pos_ += n;
    return out;
}

std::string
BinaryReader::get_string() {
    auto n = get<uint32_t>();
    return get_bytes(n);
}

void
BinaryReader::expect_magic(std::string_view magic) {
    if (data_.size() < magic.size() || std::string_view(data_).substr(0, magic.size()) != magic) {
        fail(fmt::format("bad magic (expected \"{}\")", magic));
    }
    pos_ = magic.size();
}

}  // namespace tqa
