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


#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "helpers.h"
#include "tqa/reader.h"

using namespace tqa;
using tqa::testing::make_table;
using tqa::testing::TempDir;

namespace {

ReaderParams
small_reader(uint64_t seed = 1, double scale = -1.0) {
    ReaderOptions opt;
    opt.r = 6;
    opt.hidden = 5;
    opt.feature_dims = 4096;
    opt.seed = seed;
    opt.init_scale = scale;
    return make_reader(opt);
}

void
randomize_dense(ReaderParams& rp, Rng& rng, double scale) {
    for (auto& v : rp.dense) {
        v = rng.uniform(-scale, scale);
    }
}

// Spans a cell of n tokens yields when lengths are capped at m.
size_t
capped_triangle(size_t n, size_t m) {
    return n <= m ? n * (n + 1) / 2 : m * n - m * (m - 1) / 2;
}

std::vector<double>
mean_rep(const ReaderParams& rp, const std::string& q, const Table& t) {
    const auto enc = encode_for_reader(rp, q, t);
    std::vector<double> m(size_t(rp.r), 0.0);
    for (const auto& rep : enc.reps) {
        for (size_t i = 0; i < m.size(); ++i) {
            m[i] += rep[i] / double(enc.reps.size());
        }
    }
    return m;
}

std::vector<double>
direct_softmax(const std::vector<double>& x) {
    const double mx = *std::max_element(x.begin(), x.end());
    std::vector<double> out;
    double z = 0;
    for (double v : x) {
        out.push_back(std::exp(v - mx));
        z += out.back();
    }
    for (auto& v : out) {
        v /= z;
    }
    return out;
}

double
dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        s += a[i] * b[i];
    }
    return s;
}

}  // namespace

TEST_SUITE("reader") {
    TEST_CASE("span enumeration examples") {
        CHECK(enumerate_spans(make_table("t", "Title words", {"paris"}, {}), 10).size() == 1);
        const auto t = make_table("t", "T", {"a b c", "d e"}, {});
        CHECK(enumerate_spans(t, 10).size() == 9);
        CHECK(enumerate_spans(t, 3).size() == 9);
        CHECK(enumerate_spans(t, 1).size() == 5);
        CHECK(enumerate_spans(t, 10, false).empty());
        const auto spans = enumerate_spans(make_table("t", "T", {"h"}, {{"The Red  Album"}}), 10, false);
        REQUIRE(spans.size() == 6);
        CHECK(spans[0] == SpanCandidate{1, 1, 0, 0, "The"});
        CHECK(spans[2] == SpanCandidate{1, 1, 0, 2, "The Red  Album"});
        CHECK(spans[5].text == "Album");
        CHECK_THROWS_AS(enumerate_spans(t, 0), Error);
    }

    TEST_CASE("span counts follow the capped closed form") {
        Rng rng(2);
        for (int trial = 0; trial < 50; ++trial) {
            const size_t cols = 1 + rng.below(3);
            std::vector<std::string> header;
            std::vector<std::vector<std::string>> rows(rng.below(4));
            auto cell = [&] {
                std::string s;
                for (size_t k = 0, n = rng.below(15); k < n; ++k) {
                    s += "w" + std::to_string(rng.below(9)) + (rng.below(2) ? " " : ", ");
                }
                return s;
            };
            for (size_t c = 0; c < cols; ++c) {
                header.push_back(cell());
            }
            for (auto& row : rows) {
                for (size_t c = 0; c < cols; ++c) {
                    row.push_back(cell());
                }
            }
            const auto t = make_table("t", "ignored title words", header, rows);
            const size_t cap = 1 + rng.below(12);
            size_t expected = 0;
            for (const auto& h : header) {
                expected += capped_triangle(tokenize_words(h).size(), cap);
            }
            for (const auto& row : rows) {
                for (const auto& c : row) {
                    expected += capped_triangle(tokenize_words(c).size(), cap);
                }
            }
            const auto spans = enumerate_spans(t, int(cap));
            CHECK(spans.size() == expected);
            for (size_t i = 0; i < spans.size(); ++i) {
                const auto& s = spans[i];
                CHECK(s.token_start <= s.token_end);
                CHECK(s.token_end - s.token_start + 1 <= int(cap));
                const auto& text = s.row_idx == 0 ? header[size_t(s.col_idx - 1)] : rows[size_t(s.row_idx - 1)][size_t(s.col_idx - 1)];
                CHECK(s.token_end < int(tokenize_words(text).size()));
                if (i > 0) {
                    const auto& p = spans[i - 1];
                    CHECK(std::tie(p.row_idx, p.col_idx, p.token_start, p.token_end) <
                          std::tie(s.row_idx, s.col_idx, s.token_start, s.token_end));
                }
            }
        }
    }

    TEST_CASE("zero parameters give zero vectors and flat scores") {
        const auto rp = small_reader(1, 0.0);
        const auto t = make_table("t", "T", {"city"}, {{"paris"}, {"new york"}});
        const Question q{"q", "which city"};
        CHECK(token_representation(rp, q, t, 2) == std::vector<double>(6, 0.0));
        CHECK(score_candidate(rp, q, t) == 0.0);
        const auto spans = enumerate_spans(t, 10);
        const auto scores = score_spans(rp, q, t, spans);
        const auto p = direct_softmax(scores);
        for (double v : p) {
            CHECK(v == doctest::Approx(1.0 / double(spans.size())).epsilon(1e-12));
        }
        CHECK_THROWS_AS(score_spans(rp, q, t, std::vector<SpanCandidate>{}), Error);
    }

    TEST_CASE("representations depend on the token and the question") {
        const auto rp = small_reader(3);
        const auto t = make_table("t", "T", {"a", "b"}, {{"x", "y"}, {"x", "z"}});
        const Question q{"q", "find x"};
        // Token order: title, header a, header b, then cells row-major.
        CHECK(token_representation(rp, q, t, 3) == token_representation(rp, q, t, 5));
        CHECK(token_representation(rp, q, t, 3) != token_representation(rp, Question{"q", "other words"}, t, 3));
        const auto enc = encode_for_reader(rp, q.text, t);
        CHECK(enc.reps[3] == token_representation(rp, q, t, 3));
    }

    TEST_CASE("softmax of span scores sums to one") {
        auto rp = small_reader(4);
        Rng rng(5);
        randomize_dense(rp, rng, 1.0);
        const auto t = make_table("t", "T", {"h1", "h2"}, {{"a b c", "d"}, {"e f", "g h i j"}});
        const auto single = make_table("s", "T", {"h"}, {});
        const Question q{"q", "a question"};
        const auto p = direct_softmax(score_spans(rp, q, t, enumerate_spans(t, 10)));
        double sum = 0;
        for (double v : p) {
            sum += v;
        }
        CHECK(std::abs(sum - 1.0) < 1e-9);
        CHECK(direct_softmax(score_spans(rp, q, single, enumerate_spans(single, 10)))[0] == 1.0);
    }

    TEST_CASE("span scores are an MLP over start and end representations") {
        auto rp = small_reader(6);
        Rng rng(7);
        randomize_dense(rp, rng, 1.0);
        const auto t = make_table("t", "T", {"h"}, {{"a b c"}});
        const Question q{"q", "what"};
        const auto spans = enumerate_spans(t, 10, false);
        const auto scores = score_spans(rp, q, t, spans);
        const size_t r = 6, hidden = 5;
        for (size_t k = 0; k < spans.size(); ++k) {
            // Title token, header token, then the cell tokens.
            const auto hs = token_representation(rp, q, t, 2 + size_t(spans[k].token_start));
            const auto he = token_representation(rp, q, t, 2 + size_t(spans[k].token_end));
            double out = rp.dense[rp.b2_offset()];
            for (size_t j = 0; j < hidden; ++j) {
                double z = rp.dense[rp.b1_offset() + j];
                for (size_t i = 0; i < r; ++i) {
                    z += rp.dense[j * 2 * r + i] * hs[i] + rp.dense[j * 2 * r + r + i] * he[i];
                }
                out += rp.dense[rp.w2_offset() + j] * std::log1p(std::exp(z));
            }
            CHECK(scores[k] == doctest::Approx(out).epsilon(1e-12));
        }
        CHECK(softplus(0.0) == doctest::Approx(std::log(2.0)));
        CHECK(softplus(800.0) == doctest::Approx(800.0));
        CHECK(softplus(-800.0) >= 0.0);
    }

    TEST_CASE("candidate logit is linear in the mean representation") {
        auto rp = small_reader(8);
        Rng rng(9);
        randomize_dense(rp, rng, 1.0);
        const auto t = make_table("t", "x", {"h"}, {{"a b"}});
        const auto doubled = make_table("t", "x x", {"h h"}, {{"a b a b"}});
        const Question q{"q", "which a"};
        CHECK(score_candidate(rp, q, doubled) == doctest::Approx(score_candidate(rp, q, t)).epsilon(1e-12));
        const auto m = mean_rep(rp, q.text, t);
        std::vector<double> wc(rp.dense.begin() + long(rp.wc_offset()), rp.dense.begin() + long(rp.bc_offset()));
        CHECK(score_candidate(rp, q, t) == doctest::Approx(dot(wc, m) + rp.dense[rp.bc_offset()]).epsilon(1e-12));
    }

    TEST_CASE("answer takes the highest-logit candidate whatever its spans score") {
        auto rp = small_reader(10);
        Rng rng(11);
        randomize_dense(rp, rng, 1.0);
        const Question q{"q", "who"};
        const auto a = make_table("a", "first", {"h"}, {{"alpha"}});
        const auto b = make_table("b", "second", {"h"}, {{"beta gamma"}});
        const auto e = make_table("e", "empty", {}, {});
        // Pick the candidate scorer so the logits come out as 2 and 1.
        const auto ma = mean_rep(rp, q.text, a), mb = mean_rep(rp, q.text, b);
        const double aa = dot(ma, ma), ab = dot(ma, mb), bb = dot(mb, mb), det = aa * bb - ab * ab;
        const double x = (2.0 * bb - 1.0 * ab) / det, y = (1.0 * aa - 2.0 * ab) / det;
        for (size_t i = 0; i < 6; ++i) {
            rp.dense[rp.wc_offset() + i] = x * ma[i] + y * mb[i];
        }
        rp.dense[rp.bc_offset()] = 0.0;
        REQUIRE(score_candidate(rp, q, a) == doctest::Approx(2.0).epsilon(1e-9));
        REQUIRE(score_candidate(rp, q, b) == doctest::Approx(1.0).epsilon(1e-9));
        // Make b's spans outscore a's so the choice cannot come from span scores.
        rp.dense[rp.b2_offset()] = 0.0;
        const auto sa = score_spans(rp, q, a, enumerate_spans(a, 10));
        const auto sb = score_spans(rp, q, b, enumerate_spans(b, 10));
        if (*std::max_element(sb.begin(), sb.end()) < *std::max_element(sa.begin(), sa.end())) {
            for (size_t j = 0; j < 5; ++j) {
                rp.dense[rp.w2_offset() + j] = -rp.dense[rp.w2_offset() + j];
            }
        }
        const std::vector<const Table*> cands{&b, &e, &a};
        const auto ans = answer(rp, q, cands);
        CHECK(ans.status == AnswerStatus::kOk);
        CHECK(ans.table_id == "a");
        const auto spans = enumerate_spans(a, 10);
        const auto scores = score_spans(rp, q, a, spans);
        CHECK(ans.text == spans[size_t(std::max_element(scores.begin(), scores.end()) - scores.begin())].text);
        CHECK(ans.score == doctest::Approx(2.0).epsilon(1e-9));
        CHECK(ans.per_candidate.size() == 2);
        for (const auto& perm : {std::vector<const Table*>{&a, &b, &e}, std::vector<const Table*>{&e, &a, &b}}) {
            const auto again = answer(rp, q, perm);
            CHECK(again.table_id == ans.table_id);
            CHECK(again.text == ans.text);
        }
        const std::vector<const Table*> none{&e};
        CHECK(answer(rp, q, none).status == AnswerStatus::kNoSpans);
        CHECK(answer(rp, q, none).text.empty());
        CHECK_THROWS_AS(answer(rp, q, std::vector<const Table*>{}), Error);
    }

    TEST_CASE("span matching compares tokens") {
        const SpanCandidate s{1, 1, 0, 1, "Red Album"};
        CHECK(span_matches(s, std::vector<std::string>{"red album"}));
        CHECK(span_matches(s, std::vector<std::string>{"x", "RED, album!"}));
        CHECK_FALSE(span_matches(s, std::vector<std::string>{"red"}));
    }

    TEST_CASE("reader data adds a missing gold table") {
        Corpus c;
        c.add(make_table("g", "G", {"city"}, {{"paris"}}));
        c.add(make_table("o", "O", {"city"}, {{"rome"}}));
        const std::vector<QAExample> ex{{{"q1", "?"}, "g", {"Paris"}},
                                        {{"q2", "?"}, "o", {"paris"}},
                                        {{"q3", "?"}, std::nullopt, {"x"}}};
        RetrievalRun run;
        run.add({"q1", {{"o", 1.0}}});
        const auto d = build_reader_data(run, ex, c, 10, 10, true);
        REQUIRE(d.examples.size() == 1);
        CHECK(d.examples[0].candidates.size() == 2);
        CHECK(d.examples[0].candidates[d.examples[0].gold] == c.find("g"));
        CHECK(d.skipped_no_span == 1);
        CHECK(d.skipped_no_gold == 1);
        const auto lone = build_reader_data(RetrievalRun{}, ex, c, 10, 10, true);
        REQUIRE(lone.examples.size() == 1);
        CHECK(lone.examples[0].candidates.size() == 1);
    }

    TEST_CASE("reader gradients match central differences") {
        auto rp = small_reader(12, 0.4);
        Rng rng(13);
        randomize_dense(rp, rng, 0.5);
        const auto g = make_table("g", "G page", {"city", "note"}, {{"paris", "big town"}, {"rome", "old"}});
        const auto o = make_table("o", "O page", {"city"}, {{"oslo north"}});
        const std::vector<ReaderExample> ex{{{"q", "which city is big"}, {&o, &g}, 1, {"paris"}},
                                            {{"p", "old one"}, {&g}, 0, {"old", "rome"}}};
        ReaderGrads grads;
        const auto base = reader_loss(rp, ex, &grads);
        CHECK(base.total == doctest::Approx(base.span + base.candidate).epsilon(1e-12));
        double worst = 0;
        auto check = [&](double analytic, double& param) {
            const double h = 1e-4, saved = param;
            param = saved + h;
            const double up = reader_loss(rp, ex, nullptr).total;
            param = saved - h;
            const double down = reader_loss(rp, ex, nullptr).total;
            param = saved;
            const double numeric = (up - down) / (2 * h);
            worst = std::max(worst, std::abs(analytic - numeric) / std::max(1e-6, std::abs(analytic) + std::abs(numeric)));
        };
        for (size_t i = 0; i < rp.dense.size(); ++i) {
            check(grads.dense[i], rp.dense[i]);
        }
        CHECK(grads.embeddings.size() > 5);
        for (const auto& [col, values] : grads.embeddings) {
            for (size_t k = 0; k < values.size(); ++k) {
                check(values[k], rp.embeddings.materialize(col)[k]);
            }
        }
        CHECK(worst < 1e-4);
        const std::vector<ReaderExample> bad{{{"q", "?"}, {&o}, 0, {"paris"}}};
        CHECK_THROWS_AS(reader_loss(rp, bad, nullptr), Error);
    }

    TEST_CASE("training fits a small answerable set") {
        Corpus c;
        std::vector<QAExample> ex;
        for (int i = 0; i < 20; ++i) {
            const auto name = "n" + std::to_string(i);
            c.add(make_table("t" + std::to_string(i), "page " + name, {"name", "value"},
                             {{name + " x", "v" + std::to_string(i) + " w" + std::to_string(i % 3)}}));
            ex.push_back({{"q" + std::to_string(i), "value of " + name}, c[size_t(i)].table_id, {"v" + std::to_string(i)}});
        }
        const auto data = build_reader_data(RetrievalRun{}, ex, c, 10, 10, true);
        REQUIRE(data.examples.size() == 20);
        ReaderOptions ro;
        ro.r = 16;
        ro.hidden = 16;
        ro.feature_dims = 4096;
        ReaderTrainOptions opt;
        opt.steps = 2000;
        opt.batch = 4;
        opt.learning_rate = 1e-2;
        const auto result = train_reader(make_reader(ro), data.examples, opt);
        REQUIRE(result.log.size() == 2000);
        const auto final_loss = reader_loss(result.params, data.examples, nullptr);
        CHECK(final_loss.span < 0.1);
        const auto again = train_reader(make_reader(ro), data.examples, opt);
        CHECK(again.params == result.params);
    }

    TEST_CASE("reader files round trip") {
        TempDir dir("reader-rt");
        auto rp = small_reader(14);
        Rng rng(15);
        randomize_dense(rp, rng, 1.0);
        for (auto& v : rp.embeddings.materialize(77)) {
            v = rng.uniform(-1, 1);
        }
        save_reader(rp, dir / "r.bin");
        const auto once = load_reader(dir / "r.bin");
        CHECK(once.r == rp.r);
        CHECK(once.hidden == rp.hidden);
        for (size_t i = 0; i < rp.dense.size(); ++i) {
            CHECK(once.dense[i] == doctest::Approx(rp.dense[i]).epsilon(1e-6));
        }
        save_reader(once, dir / "s.bin");
        CHECK(load_reader(dir / "s.bin") == once);
        std::filesystem::resize_file(dir / "s.bin", 20);
        CHECK_THROWS_AS(load_reader(dir / "s.bin"), FormatError);
    }
}
