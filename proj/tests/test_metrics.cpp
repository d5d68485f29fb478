#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "tbn/error.hpp"
#include "tbn/metrics.hpp"
#include "tbn/rng.hpp"

using namespace tbn;
using namespace tbn::metrics;

namespace {

/// Scores quantized to a few levels so ties are common.
Scores random_scores(std::size_t n, std::size_t c, Rng& g, int levels = 5) {
    std::uniform_int_distribution<int> d(0, levels - 1);
    Scores s({n, c});
    for (auto& v : s.values()) v = d(g) / static_cast<double>(levels);
    return s;
}

std::vector<int> random_labels(std::size_t n, int c, Rng& g) {
    std::uniform_int_distribution<int> d(0, c - 1);
    std::vector<int> l(n);
    for (auto& v : l) v = d(g);
    return l;
}

/// Sort each row by (score desc, class asc); the label must be in the first k.
double oracle_top_k(const Scores& s, const std::vector<int>& labels, int k) {
    int hits = 0;
    for (std::size_t r = 0; r < s.rows(); ++r) {
        std::vector<int> idx(s.cols());
        std::iota(idx.begin(), idx.end(), 0);
        std::sort(idx.begin(), idx.end(), [&](int a, int b) {
            return s.at(r, a) != s.at(r, b) ? s.at(r, a) > s.at(r, b) : a < b;
        });
        hits += std::find(idx.begin(), idx.begin() + k, labels[r]) != idx.begin() + k;
    }
    return static_cast<double>(hits) / static_cast<double>(s.rows());
}

int oracle_argmax(const Scores& s, std::size_t r) {
    int best = 0;
    for (std::size_t c = 1; c < s.cols(); ++c)
        if (s.at(r, c) > s.at(r, static_cast<std::size_t>(best))) best = static_cast<int>(c);
    return best;
}

}  // namespace

TEST(TopK, Examples) {
    const Scores s({2, 3}, {0.1, 0.7, 0.2, 0.5, 0.4, 0.1});
    const int labels[] = {1, 1};
    EXPECT_DOUBLE_EQ(top_k(s, labels, 1), 0.5);
    EXPECT_DOUBLE_EQ(top_k(s, labels, 2), 1.0);
    EXPECT_DOUBLE_EQ(top_k(s, labels, 3), 1.0);
    const int one[] = {1};
    EXPECT_DOUBLE_EQ(top_k(Scores({1, 3}, {0.0, 1.0, 0.0}), one, 1), 1.0);
}

TEST(TopK, TiesFavourLowerIndex) {
    const Scores s({1, 3}, {0.5, 0.5, 0.5});
    const int zero[] = {0}, two[] = {2};
    EXPECT_DOUBLE_EQ(top_k(s, zero, 1), 1.0);
    EXPECT_DOUBLE_EQ(top_k(s, two, 2), 0.0);
}

TEST(TopK, Errors) {
    const Scores s({1, 3});
    const int bad[] = {3};
    EXPECT_THROW(top_k(s, bad, 1), InvalidArgument);
    const int ok[] = {0};
    EXPECT_THROW(top_k(s, ok, 4), InvalidArgument);
}

TEST(TopK, MatchesSortOracle) {
    Rng g(1);
    for (int trial = 0; trial < 100; ++trial) {
        const auto s = random_scores(100, 10, g);
        const auto l = random_labels(100, 10, g);
        for (int k : {1, 3, 5, 10}) ASSERT_DOUBLE_EQ(top_k(s, l, k), oracle_top_k(s, l, k)) << trial << ' ' << k;
    }
}

TEST(ActionAccuracy, Examples) {
    const Scores v({2, 2}, {1, 0, 0, 1});
    const Scores n({2, 2}, {1, 0, 0, 1});
    const int right[] = {0, 1}, wrong[] = {1, 0};
    EXPECT_DOUBLE_EQ(action_accuracy(v, n, right, wrong), 0.0);
    EXPECT_DOUBLE_EQ(action_accuracy(v, n, right, right), 1.0);
}

TEST(ActionAccuracy, MatchesConjunctionOracle) {
    Rng g(2);
    for (int trial = 0; trial < 100; ++trial) {
        const auto v = random_scores(50, 6, g, 3);
        const auto n = random_scores(50, 4, g, 3);
        const auto lv = random_labels(50, 6, g);
        const auto ln = random_labels(50, 4, g);
        int hits = 0;
        for (std::size_t r = 0; r < 50; ++r) hits += oracle_argmax(v, r) == lv[r] && oracle_argmax(n, r) == ln[r];
        ASSERT_DOUBLE_EQ(action_accuracy(v, n, lv, ln), hits / 50.0);
    }
}

TEST(ActionTopK, Top1AgreesWithProductArgmax) {
    Rng g(3);
    std::uniform_real_distribution<double> u(0, 1);
    for (int trial = 0; trial < 50; ++trial) {
        Scores v({20, 5}), n({20, 4});
        for (auto& x : v.values()) x = u(g);
        for (auto& x : n.values()) x = u(g);
        const auto lv = random_labels(20, 5, g);
        const auto ln = random_labels(20, 4, g);
        EXPECT_DOUBLE_EQ(action_top_k(v, n, lv, ln, 1), action_accuracy(v, n, lv, ln));
        EXPECT_DOUBLE_EQ(action_top_k(v, n, lv, ln, 20), 1.0);
    }
}

TEST(PerClassPR, PerfectPredictions) {
    const Scores s({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
    const int l[] = {0, 1, 2};
    const auto pr = per_class_pr(s, l);
    EXPECT_DOUBLE_EQ(pr.macro_precision, 1.0);
    EXPECT_DOUBLE_EQ(pr.macro_recall, 1.0);
}

TEST(PerClassPR, NeverPredictedClassSkipped) {
    // Class 2 has support but is never predicted.
    const Scores s({3, 3}, {1, 0, 0, 0, 1, 0, 0, 1, 0});
    const int l[] = {0, 1, 2};
    const auto pr = per_class_pr(s, l);
    EXPECT_FALSE(pr.precision[2].has_value());
    EXPECT_DOUBLE_EQ(pr.macro_precision, (1.0 + 0.5) / 2.0);
    EXPECT_DOUBLE_EQ(pr.macro_recall, (1.0 + 1.0 + 0.0) / 3.0);
}

TEST(PerClassPR, MatchesConfusionOracle) {
    Rng g(4);
    for (int trial = 0; trial < 100; ++trial) {
        const auto s = random_scores(60, 7, g);
        const auto l = random_labels(60, 7, g);
        const auto pr = per_class_pr(s, l);
        const auto cm = confusion_matrix(s, l);
        double psum = 0, rsum = 0;
        int pn = 0, rn = 0;
        for (int c = 0; c < 7; ++c) {
            long tp = 0, pred = 0, support = 0;
            for (std::size_t r = 0; r < 60; ++r) {
                const int p = oracle_argmax(s, r);
                tp += p == c && l[r] == c;
                pred += p == c;
                support += l[r] == c;
            }
            long row = 0;
            for (long v : cm[c]) row += v;
            ASSERT_EQ(row, support);
            if (pred > 0) {
                ASSERT_DOUBLE_EQ(*pr.precision[c], static_cast<double>(tp) / pred);
                psum += static_cast<double>(tp) / pred;
                ++pn;
            } else {
                ASSERT_FALSE(pr.precision[c].has_value());
            }
            if (support > 0) {
                rsum += static_cast<double>(tp) / support;
                ++rn;
            }
        }
        ASSERT_NEAR(pr.macro_precision, psum / pn, 1e-12);
        ASSERT_NEAR(pr.macro_recall, rsum / rn, 1e-12);
    }
}

TEST(TailSplit, Examples) {
    std::vector<std::size_t> counts(20);
    for (std::size_t c = 0; c < 20; ++c) counts[c] = 100 - c;
    std::vector<std::optional<double>> acc(20, 0.5);
    const auto t = tail_split(counts, acc);
    EXPECT_EQ(t.head_classes, (std::vector<int>{0, 1}));
    EXPECT_DOUBLE_EQ(t.head_mean, 0.5);
    EXPECT_DOUBLE_EQ(t.tail_mean, 0.5);
}

TEST(TailSplit, MatchesRankingOracle) {
    Rng g(5);
    std::uniform_int_distribution<std::size_t> cnt(0, 6);
    std::uniform_real_distribution<double> u(0, 1);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t C = 5 + trial % 30;
        std::vector<std::size_t> counts(C);
        std::vector<std::optional<double>> acc(C);
        for (std::size_t c = 0; c < C; ++c) {
            counts[c] = cnt(g);
            acc[c] = u(g);
        }
        const auto head_n = static_cast<std::size_t>(std::ceil(0.1 * static_cast<double>(C)));
        std::vector<int> head;
        double hs = 0, ts = 0;
        for (std::size_t c = 0; c < C; ++c) {
            std::size_t rank = 0;
            for (std::size_t o = 0; o < C; ++o) rank += counts[o] > counts[c] || (counts[o] == counts[c] && o < c);
            if (rank < head_n) {
                head.push_back(static_cast<int>(c));
                hs += *acc[c];
            } else {
                ts += *acc[c];
            }
        }
        const auto t = tail_split(counts, acc);
        auto got = t.head_classes;
        std::sort(got.begin(), got.end());
        ASSERT_EQ(got, head);
        ASSERT_NEAR(t.head_mean, hs / static_cast<double>(head_n), 1e-12);
        ASSERT_NEAR(t.tail_mean, ts / static_cast<double>(C - head_n), 1e-12);
    }
}

TEST(Dominance, FlowAndAudioExample) {
    const double acc[] = {0.23, 0.47, 0.42};
    const std::string names[] = {"rgb", "flow", "audio"};
    EXPECT_EQ(modality_dominance(acc), (std::vector<std::size_t>{1, 2}));
    EXPECT_EQ(dominance_category(acc, names), "flow+audio");
}

TEST(Dominance, AllWithinThreshold) {
    const double acc[] = {0.5, 0.4, 0.36};
    EXPECT_EQ(modality_dominance(acc).size(), 3u);
}

TEST(Evaluate, RatesInRangeAndConsistent) {
    Rng g(6);
    const auto v = random_scores(40, 8, g);
    const auto n = random_scores(40, 8, g);
    Labels l{random_labels(40, 8, g), random_labels(40, 8, g)};
    const auto r = evaluate(v, n, l);
    EXPECT_EQ(r.n, 40u);
    for (double x : {r.verb.top1, r.verb.top5, r.noun.top1, r.action_top1, r.action_top5}) {
        EXPECT_GE(x, 0.0);
        EXPECT_LE(x, 1.0);
    }
    EXPECT_DOUBLE_EQ(r.verb.top1, oracle_top_k(v, l.verb, 1));
    EXPECT_DOUBLE_EQ(r.verb.top5, oracle_top_k(v, l.verb, 5));
    EXPECT_LE(r.action_top1, std::min(r.verb.top1, r.noun.top1));
    EXPECT_LE(r.action_top1, r.action_top5);
}

TEST(SubsetEval, SplitsByTag) {
    const Scores v({3, 2}, {1, 0, 0, 1, 1, 0});
    Labels l{{0, 0, 0}, {0, 0, 0}};
    const std::vector<std::set<std::string>> tags = {{"distractor"}, {"distractor"}, {}};
    const auto r = subset_eval(v, v, l, tags, "distractor");
    EXPECT_EQ(r.subset.n, 2u);
    EXPECT_DOUBLE_EQ(r.subset.verb.top1, 0.5);
    ASSERT_TRUE(r.complement.has_value());
    EXPECT_DOUBLE_EQ(r.complement->verb.top1, 1.0);
}

TEST(SubsetEval, EmptySubsetNamesTheTag) {
    const Scores v({1, 2}, {1, 0});
    Labels l{{0}, {0}};
    const std::vector<std::set<std::string>> tags = {{}};
    try {
        subset_eval(v, v, l, tags, "nosuchtag");
        FAIL();
    } catch (const InvalidArgument& e) {
        EXPECT_NE(std::string(e.what()).find("nosuchtag"), std::string::npos);
    }
}

TEST(Confusion, CsvLayout) {
    const Scores s({2, 2}, {1, 0, 1, 0});
    const int l[] = {0, 1};
    const auto cm = confusion_matrix(s, l);
    EXPECT_EQ(cm, (Matrix{{1, 0}, {1, 0}}));
    EXPECT_FALSE(confusion_csv(cm).empty());
}
