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

#include <cmath>

#include "helpers.h"
#include "tqa/metrics.h"

using namespace tqa;
using tqa::testing::TempDir;

namespace {

using Golds = std::vector<std::string>;

// Upper tail of chi-square with one degree of freedom by Simpson's rule on
// the substituted density 2 phi(u), u = sqrt(x).
double
chi2_tail_numeric(double x) {
    const int n = 20000;
    const double upper = std::sqrt(x), h = upper / n;
    auto f = [](double u) { return 2.0 * std::exp(-u * u / 2.0) / std::sqrt(2.0 * M_PI); };
    double s = f(0) + f(upper);
    for (int i = 1; i < n; ++i) {
        s += (i % 2 ? 4.0 : 2.0) * f(i * h);
    }
    return 1.0 - s * h / 3.0;
}

RetrievalRun
random_run(Rng& rng, std::vector<QAExample>& examples) {
    RetrievalRun run;
    examples.clear();
    for (int q = 0; q < 20; ++q) {
        const auto qid = "q" + std::to_string(q);
        examples.push_back({{qid, "?"}, "t" + std::to_string(rng.below(30)), {}});
        if (rng.below(10) == 0) {
            continue;  // absent from the run
        }
        RankedList list{qid, {}};
        std::vector<int> ids(30);
        for (int i = 0; i < 30; ++i) {
            ids[size_t(i)] = i;
        }
        for (size_t i = 30; i > 1; --i) {
            std::swap(ids[i - 1], ids[rng.below(i)]);
        }
        for (size_t r = 0, n = 1 + rng.below(30); r < n; ++r) {
            list.ranked.push_back({"t" + std::to_string(ids[r]), 100.0 - double(r)});
        }
        run.add(list);
    }
    return run;
}

}  // namespace

TEST_SUITE("metrics") {
    TEST_CASE("SQuAD normalization") {
        CHECK(squad_normalize("The Red Album") == "red album");
        CHECK(squad_normalize("  Hello,   World! ") == "hello world");
        CHECK(squad_normalize("an apple a day") == "apple day");
        CHECK(squad_normalize("cat's") == "cats");
        CHECK(squad_normalize("") == "");
    }

    TEST_CASE("exact match and F1 examples") {
        auto r = em_f1("The Red Album", Golds{"red album"});
        CHECK(r.em == 1);
        CHECK(r.f1 == 1.0);
        r = em_f1("red album", Golds{"the red album blues"});
        CHECK(r.em == 0);
        CHECK(r.f1 == doctest::Approx(0.8).epsilon(1e-12));
        r = em_f1("", Golds{"x"});
        CHECK(r.em == 0);
        CHECK(r.f1 == 0.0);
        r = em_f1("", Golds{"the"});
        CHECK(r.em == 1);
        CHECK(r.f1 == 1.0);
        r = em_f1("blues", Golds{"nothing", "red blues"});
        CHECK(r.em == 0);
        CHECK(r.f1 == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
        // Multiset overlap counts the repeated token twice.
        CHECK(em_f1("x y y", Golds{"y y z"}).f1 == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    }

    TEST_CASE("EM never exceeds F1") {
        Rng rng(1);
        const std::vector<std::string> words{"red", "the", "album", "blue", "a", "sky", "Red!"};
        for (int trial = 0; trial < 300; ++trial) {
            auto phrase = [&] {
                std::string s;
                for (size_t k = 0, n = rng.below(4); k < n; ++k) {
                    s += words[rng.below(words.size())] + " ";
                }
                return s;
            };
            const auto r = em_f1(phrase(), Golds{phrase(), phrase()});
            CHECK(double(r.em) <= r.f1 + 1e-12);
            CHECK(r.f1 >= 0.0);
            CHECK(r.f1 <= 1.0);
        }
    }

    TEST_CASE("recall and MRR examples") {
        RetrievalRun run;
        const std::vector<size_t> gold_ranks{1, 5, 12};
        std::vector<QAExample> ex;
        for (size_t q = 0; q < 3; ++q) {
            RankedList list{"q" + std::to_string(q), {}};
            for (size_t r = 1; r <= 15; ++r) {
                list.ranked.push_back({r == gold_ranks[q] ? "gold" : "o" + std::to_string(r), 100.0 - double(r)});
            }
            run.add(list);
            ex.push_back({{list.question_id, "?"}, "gold", {}});
        }
        CHECK(recall_at_k(run, ex, 10) == doctest::Approx(2.0 / 3.0));
        CHECK(recall_at_k(run, ex, 15) == 1.0);
        CHECK(mean_reciprocal_rank(run, ex, 10) == doctest::Approx((1.0 + 0.2) / 3.0));
        const IdMap map{{"gold", "rep"}};
        ex[0].gold_table_id = "rep";
        CHECK(recall_at_k(run, ex, 1, &map) == doctest::Approx(1.0 / 3.0));
        size_t missing = 0;
        ex.push_back({{"absent", "?"}, "gold", {}});
        CHECK(recall_at_k(run, ex, 15, &map, &missing) == doctest::Approx(0.75));
        CHECK(missing == 1);
        CHECK_THROWS_AS(recall_at_k(run, std::vector<QAExample>{}, 10), Error);
        std::vector<QAExample> no_gold{{{"q0", "?"}, std::nullopt, {}}};
        CHECK_THROWS_AS(recall_at_k(run, no_gold, 10), Error);
    }

    TEST_CASE("recall grows with depth") {
        Rng rng(2);
        for (int trial = 0; trial < 50; ++trial) {
            std::vector<QAExample> ex;
            const auto run = random_run(rng, ex);
            double prev = 0.0;
            for (size_t k = 1; k <= 35; ++k) {
                const double r = recall_at_k(run, ex, k);
                CHECK(r >= prev);
                CHECK(mean_reciprocal_rank(run, ex, k) <= r + 1e-12);
                prev = r;
            }
        }
    }

    TEST_CASE("oracle metrics bound the selected answers") {
        TempDir dir("metrics-qa");
        Rng rng(3);
        const std::vector<std::string> words{"red", "blue", "album", "the", "sky", "1999"};
        auto phrase = [&] {
            std::string s;
            for (size_t k = 0, n = 1 + rng.below(3); k < n; ++k) {
                s += words[rng.below(words.size())] + " ";
            }
            return s;
        };
        for (int trial = 0; trial < 30; ++trial) {
            std::vector<QAExample> ex;
            std::vector<Prediction> preds;
            for (int q = 0; q < 15; ++q) {
                const auto qid = "q" + std::to_string(q);
                ex.push_back({{qid, "?"}, "t", {phrase()}});
                Prediction p{qid, "t", phrase(), 1.0, {}};
                for (size_t c = 0, n = rng.below(4); c < n; ++c) {
                    p.candidate_answers.push_back({"c" + std::to_string(c), phrase(), 0.5});
                }
                preds.push_back(p);
            }
            const auto rep = qa_report(preds, ex);
            CHECK(rep.at("oracle_em") >= rep.at("em"));
            CHECK(rep.at("oracle_f1") >= rep.at("f1"));
            CHECK(rep.at("em") <= rep.at("f1"));
            save_predictions(preds, dir / "p.jsonl");
            CHECK(load_predictions(dir / "p.jsonl") == preds);
        }
    }

    TEST_CASE("report counts and oracle credit") {
        const std::vector<QAExample> ex{{{"a", "?"}, "t", {"paris"}},
                                        {{"b", "?"}, "t", {"rome"}},
                                        {{"c", "?"}, "t", {}},
                                        {{"d", "?"}, "t", {"oslo"}}};
        const std::vector<Prediction> preds{
            {"a", "t", "Paris", 1.0, {}},
            {"b", "t", "milan", 1.0, {{"u", "milan", 1.0}, {"v", "Rome", 0.2}}},
            {"zzz", "t", "x", 1.0, {}}};
        const auto rep = qa_report(preds, ex);
        CHECK(rep.num_questions == 3);
        CHECK(rep.num_missing == 1);
        CHECK(rep.num_skipped == 2);
        CHECK(rep.at("em") == doctest::Approx(1.0 / 3.0));
        CHECK(rep.at("oracle_em") == doctest::Approx(2.0 / 3.0));
        const std::vector<Prediction> perfect{{"a", "t", "paris", 1.0, {}}};
        const auto one = qa_report(perfect, std::span(ex).first(1));
        for (const char* m : {"em", "f1", "oracle_em", "oracle_f1"}) {
            CHECK(one.at(m) == 1.0);
        }
        CHECK(one.to_json().find("\"num_questions\"") != std::string::npos);
    }

    TEST_CASE("McNemar examples") {
        std::vector<int> a, b;
        for (int i = 0; i < 5; ++i) {
            a.push_back(1);
            b.push_back(0);
        }
        for (int i = 0; i < 15; ++i) {
            a.push_back(0);
            b.push_back(1);
        }
        for (int i = 0; i < 30; ++i) {
            a.push_back(i % 2);
            b.push_back(i % 2);
        }
        const auto r = mcnemar(a, b);
        CHECK(r.b == 5);
        CHECK(r.c == 15);
        CHECK(r.statistic == doctest::Approx(4.05).epsilon(1e-12));
        CHECK(r.p_value == doctest::Approx(chi2_tail_numeric(4.05)).epsilon(1e-8));
        CHECK(std::abs(r.p_value - 0.044) < 0.002);
        const auto same = mcnemar(a, a);
        CHECK(same.p_value == 1.0);
        CHECK(same.statistic == 0.0);
        const auto floor = mcnemar(std::vector<int>{0}, std::vector<int>{1});
        CHECK(floor.statistic == 0.0);
        CHECK(floor.p_value == 1.0);
        CHECK_THROWS_AS(mcnemar(std::vector<int>{1}, std::vector<int>{1, 0}), Error);
    }

    TEST_CASE("McNemar is symmetric and matches the numeric tail") {
        Rng rng(4);
        for (int trial = 0; trial < 30; ++trial) {
            std::vector<int> a(60), b(60);
            for (size_t i = 0; i < 60; ++i) {
                a[i] = int(rng.below(2));
                b[i] = int(rng.below(2));
            }
            const auto ab = mcnemar(a, b), ba = mcnemar(b, a);
            CHECK(ab.p_value == ba.p_value);
            CHECK(ab.b == ba.c);
            if (ab.statistic > 0) {
                CHECK(ab.p_value == doctest::Approx(chi2_tail_numeric(ab.statistic)).epsilon(1e-7));
            }
        }
    }

    TEST_CASE("retrieval report lists every depth") {
        Rng rng(5);
        std::vector<QAExample> ex;
        const auto run = random_run(rng, ex);
        const std::vector<size_t> ks{1, 10, 50};
        const auto rep = retrieval_report(run, ex, ks);
        REQUIRE(rep.metrics.size() == 3);
        CHECK(rep.metrics[0].first == "recall@1");
        CHECK(rep.at("recall@10") == recall_at_k(run, ex, 10));
        CHECK(rep.num_questions == ex.size());
        CHECK_THROWS_AS(rep.at("recall@7"), Error);
    }
}
