#include <gtest/gtest.h>

#include <cstdint>
#include <algorithm>
#include <cmath>
#include <set>

#include "tbn/error.hpp"
#include "tbn/sampler.hpp"

using namespace tbn;

namespace {

/// ceil(p / q) for integers, q > 0.
long ceil_div(std::int64_t p, std::int64_t q) {
    return static_cast<long>(p >= 0 ? (p + q - 1) / q : -((-p) / q));
}

/// Exact TBW bounds for integer rates, integer T and b = bn/bd * T seconds.
IndexRange exact_bounds(long j, std::int64_t ra, std::int64_t rt, std::int64_t T, std::int64_t bn, std::int64_t bd) {
    // j*rt/ra -+ (bn/bd)*T*rt == (j*rt*bd -+ bn*T*rt*ra) / (ra*bd)
    const std::int64_t centre = static_cast<std::int64_t>(j) * rt * bd;
    const std::int64_t half = bn * T * rt * ra;
    return {ceil_div(centre - half, ra * bd), ceil_div(centre + half, ra * bd)};
}

std::vector<ModalitySpec> three(double a, double b, double c) {
    return {{"rgb", a, ModalityKind::vector_frame}, {"flow", b, ModalityKind::vector_frame},
            {"audio", c, ModalityKind::vector_frame}};
}

ActionSegment seg(double T) { return {"v", 0.0, T, 0, 0, {}}; }

}  // namespace

TEST(MapIndex, Examples) {
    EXPECT_EQ(map_index(10, 60, 60), 10);
    EXPECT_EQ(map_index(7, 60, 30), 4);
    EXPECT_EQ(map_index(3, 30, 60), 6);
}

TEST(MapIndex, RejectsNonPositiveRates) {
    EXPECT_THROW(map_index(1, 0, 30), InvalidArgument);
    EXPECT_THROW(map_index(1, 30, -1), InvalidArgument);
}

TEST(Partition, ExactDivision) {
    const auto r = partition_frames(300, 3);
    ASSERT_EQ(r.size(), 3u);
    EXPECT_EQ(r[0], (IndexRange{0, 100}));
    EXPECT_EQ(r[1], (IndexRange{100, 200}));
    EXPECT_EQ(r[2], (IndexRange{200, 300}));
}

TEST(Partition, LastRangeAbsorbsRemainder) {
    const auto r = partition_frames(301, 3);
    EXPECT_EQ(r[0], (IndexRange{0, 100}));
    EXPECT_EQ(r[1], (IndexRange{100, 200}));
    EXPECT_EQ(r[2], (IndexRange{200, 301}));
}

TEST(Partition, TooShort) { EXPECT_THROW(partition_frames(2, 3), TooShortSegment); }

TEST(Partition, FromSegmentDuration) {
    const auto r = partition_segments(seg(5.0), 3, 60.0);
    EXPECT_EQ(r.back().hi, 300);
    // 0.1 s at 30 Hz is 3 frames despite 0.1 * 30 rounding above 3 in binary.
    EXPECT_EQ(frame_count(0.1, 30.0), 3);
}

TEST(Partition, RangesCoverAndAreDisjoint) {
    for (long n = 1; n < 200; n += 7) {
        for (int k = 1; k <= std::min<long>(n, 9); ++k) {
            const auto r = partition_frames(n, k);
            ASSERT_EQ(r.size(), static_cast<std::size_t>(k));
            EXPECT_EQ(r.front().lo, 0);
            EXPECT_EQ(r.back().hi, n);
            for (int i = 0; i + 1 < k; ++i) {
                EXPECT_EQ(r[i].hi, r[i + 1].lo);
                EXPECT_EQ(r[i].hi - r[i].lo, n / k);
            }
        }
    }
}

TEST(TbwBounds, Examples) {
    EXPECT_EQ(tbw_bounds(10, 60, 30, 0.0), (IndexRange{5, 5}));
    EXPECT_EQ(tbw_bounds(10, 60, 30, 0.1), (IndexRange{2, 8}));
    EXPECT_EQ(tbw_bounds(0, 60, 30, 0.1), (IndexRange{-3, 3}));
    EXPECT_THROW(tbw_bounds(0, 60, 30, -0.1), InvalidArgument);
}

TEST(TbwBounds, CompanionsClampedToStream) {
    // Anchor frame 0 at 60 Hz against a 30 Hz stream with b = 0.1 s: raw window [-3, 3].
    const std::vector<ModalitySpec> specs = {{"a", 60, ModalityKind::vector_frame},
                                             {"b", 30, ModalityKind::vector_frame}};
    Rng rng(1);
    std::set<long> raws;
    for (int i = 0; i < 20000; ++i) {
        const auto t = sample_single_tbw(seg(2.0), specs, 0.1, rng);
        if (t.index[0] != 0) continue;
        raws.insert(t.raw[1]);
        EXPECT_EQ(t.index[1], std::max(0L, t.raw[1]));
    }
    ASSERT_FALSE(raws.empty());
    EXPECT_GE(*raws.begin(), -3);
    EXPECT_LE(*raws.rbegin(), 3);
}

TEST(TbwBounds, MatchesExactRationalOracle) {
    for (long j = 0; j < 400; ++j) {
        for (auto [ra, rt] : {std::pair{60, 30}, {30, 60}, {60, 75}, {75, 60}, {25, 24000}}) {
            for (auto [bn, bd] : {std::pair{0, 1}, {1, 30}, {1, 10}, {1, 3}, {1, 1}}) {
                const auto got = tbw_bounds(j, ra, rt, 2.0 * bn / bd);
                EXPECT_EQ(got, exact_bounds(j, ra, rt, 2, bn, bd)) << j << ' ' << ra << ' ' << rt << ' ' << bn << '/' << bd;
            }
        }
    }
}

TEST(TrainingTuples, KTimesMSamples) {
    Rng rng(3);
    TBWConfig cfg;
    const auto tuples = sample_training_tuples(seg(2.0), three(60, 30, 75), cfg, rng);
    ASSERT_EQ(tuples.size(), 3u);
    std::size_t total = 0;
    for (const auto& t : tuples) total += t.index.size();
    EXPECT_EQ(total, 9u);
}

TEST(TrainingTuples, ZeroWindowEqualRatesShareIndex) {
    Rng rng(4);
    TBWConfig cfg;
    cfg.b_rel = 0.0;
    for (int i = 0; i < 100; ++i) {
        for (const auto& t : sample_training_tuples(seg(2.0), three(50, 50, 50), cfg, rng)) {
            EXPECT_EQ(t.index[1], t.index[0]);
            EXPECT_EQ(t.index[2], t.index[0]);
        }
    }
}

TEST(TrainingTuples, BoundSoundnessOverManyDraws) {
    // 10^5 tuples at b = T against the exact rational oracle.
    Rng rng(5);
    TBWConfig cfg;
    cfg.b_rel = 1.0;
    const auto specs = three(60, 30, 75);
    const long n_frames[] = {120, 60, 150};
    long violations = 0;
    for (int d = 0; d < 100000 / 3 + 1; ++d) {
        for (const auto& t : sample_training_tuples(seg(2.0), specs, cfg, rng)) {
            for (std::size_t m = 1; m < 3; ++m) {
                const auto b = exact_bounds(t.index[0], 60, static_cast<std::int64_t>(specs[m].rate), 2, 1, 1);
                violations += t.raw[m] < b.lo || t.raw[m] > b.hi;
                violations += t.index[m] < 0 || t.index[m] >= n_frames[m];
            }
        }
    }
    EXPECT_EQ(violations, 0);
}

TEST(TrainingTuples, AnchorsCoverTheirOwnRange) {
    Rng rng(6);
    TBWConfig cfg;
    cfg.segments = 4;
    const auto ranges = partition_frames(120, 4);
    for (int i = 0; i < 500; ++i) {
        const auto tuples = sample_training_tuples(seg(2.0), three(60, 30, 75), cfg, rng);
        for (std::size_t k = 0; k < tuples.size(); ++k) {
            EXPECT_GE(tuples[k].index[0], ranges[k].lo);
            EXPECT_LT(tuples[k].index[0], ranges[k].hi);
        }
    }
}

TEST(TrainingTuples, ZeroWindowEqualsSynchronousSampler) {
    TBWConfig cfg;
    cfg.b_rel = 0.0;
    for (std::uint64_t s = 0; s < 200; ++s) {
        Rng a(s), b(s);
        const auto tbw = sample_training_tuples(seg(2.0), three(60, 30, 75), cfg, a);
        const auto sync = sample_synchronous_tuples(seg(2.0), three(60, 30, 75), 3, b);
        ASSERT_EQ(tbw.size(), sync.size());
        for (std::size_t k = 0; k < tbw.size(); ++k) {
            EXPECT_EQ(tbw[k].index, sync[k].index);
            EXPECT_EQ(tbw[k].raw, sync[k].raw);
        }
        EXPECT_EQ(a, b);  // identical rng consumption
    }
}

TEST(TrainingTuples, WrongModeRejected) {
    Rng rng(0);
    TBWConfig cfg;
    cfg.mode = SamplingMode::test_deterministic;
    EXPECT_THROW(sample_training_tuples(seg(2.0), three(60, 30, 75), cfg, rng), InvalidArgument);
}

TEST(TrainingTuples, TooShortPropagates) {
    Rng rng(0);
    TBWConfig cfg;
    EXPECT_THROW(sample_training_tuples(seg(2.0 / 60.0), three(60, 30, 75), cfg, rng), TooShortSegment);
}

TEST(TrainingTuples, AudioCompanionsAreNotClamped) {
    const std::vector<ModalitySpec> specs = {{"rgb", 60, ModalityKind::vector_frame},
                                             {"wave", 24000, ModalityKind::audio_waveform}};
    Rng rng(8);
    TBWConfig cfg;
    cfg.b_rel = 1.0;
    long below = 0;
    for (int i = 0; i < 200; ++i) {
        for (const auto& t : sample_training_tuples(seg(2.0), specs, cfg, rng)) {
            EXPECT_EQ(t.raw[1], t.index[1]);
            below += t.index[1] < 0;
        }
    }
    EXPECT_GT(below, 0);
}

TEST(TestTuples, CentresOfEvenSubIntervals) {
    TBWConfig cfg;
    cfg.mode = SamplingMode::test_deterministic;
    const auto t = sample_test_tuples(seg(5.0), three(50, 50, 50), cfg);  // N = 250
    ASSERT_EQ(t.size(), 25u);
    for (std::size_t i = 0; i < t.size(); ++i) {
        EXPECT_EQ(t[i].index[0], static_cast<long>(5 + 10 * i));
        EXPECT_EQ(t[i].index[1], t[i].index[0]);
        EXPECT_EQ(t[i].index[2], t[i].index[0]);
    }
}

TEST(TestTuples, SingleAnchorAtMidpoint) {
    TBWConfig cfg;
    cfg.mode = SamplingMode::test_deterministic;
    cfg.n_test_anchors = 1;
    const std::vector<ModalitySpec> specs = {{"rgb", 50, ModalityKind::vector_frame}};
    EXPECT_EQ(sample_test_tuples(seg(2.0), specs, cfg).at(0).index[0], 50);
}

TEST(TestTuples, SynchronousPlacementUsesMapIndex) {
    TBWConfig cfg;
    cfg.mode = SamplingMode::test_deterministic;
    for (const auto& t : sample_test_tuples(seg(2.0), three(60, 30, 75), cfg)) {
        EXPECT_EQ(t.index[1], std::min(map_index(t.index[0], 60, 30), 59L));
        EXPECT_EQ(t.index[2], std::min(map_index(t.index[0], 60, 75), 149L));
    }
}

TEST(TestTuples, SpreadPlacementIsDeterministicAndBounded) {
    TBWConfig cfg;
    cfg.mode = SamplingMode::test_deterministic;
    cfg.test_placement = TestPlacement::spread;
    cfg.b_rel = 0.1;
    const auto a = sample_test_tuples(seg(2.0), three(60, 30, 75), cfg);
    const auto b = sample_test_tuples(seg(2.0), three(60, 30, 75), cfg);
    bool any_offset = false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].index, b[i].index);
        for (std::size_t m = 1; m < 3; ++m) {
            const auto rt = static_cast<std::int64_t>(three(60, 30, 75)[m].rate);
            const auto bounds = exact_bounds(a[i].index[0], 60, rt, 2, 1, 10);
            EXPECT_GE(a[i].raw[m], bounds.lo);
            EXPECT_LE(a[i].raw[m], bounds.hi);
            any_offset = any_offset || a[i].index[m] != map_index(a[i].index[0], 60, static_cast<double>(rt));
        }
    }
    EXPECT_TRUE(any_offset);
}

TEST(TestTuples, TooShortPropagates) {
    TBWConfig cfg;
    cfg.mode = SamplingMode::test_deterministic;
    EXPECT_THROW(sample_test_tuples(seg(0.2), three(60, 30, 75), cfg), TooShortSegment);  // 12 < 25 anchors
}

TEST(SingleTbw, ZeroWindowIsSynchronous) {
    Rng rng(9);
    for (int i = 0; i < 200; ++i) {
        const auto t = sample_single_tbw(seg(2.0), three(60, 30, 75), 0.0, rng);
        EXPECT_EQ(t.index[1], std::min(map_index(t.index[0], 60, 30), 59L));
        EXPECT_EQ(t.index[2], std::min(map_index(t.index[0], 60, 75), 149L));
    }
}

TEST(SingleTbw, NarrowWindowRespectsBounds) {
    Rng rng(10);
    const double T = 2.0;
    for (int run = 0; run < 100; ++run) {
        const auto t = sample_single_tbw(seg(T), three(60, 30, 75), T / 30, rng);
        for (std::size_t m = 1; m < 3; ++m) {
            const auto rt = static_cast<std::int64_t>(three(60, 30, 75)[m].rate);
            const auto b = exact_bounds(t.index[0], 60, rt, 2, 1, 30);
            EXPECT_GE(t.raw[m], b.lo);
            EXPECT_LE(t.raw[m], b.hi);
        }
    }
}

TEST(SingleTbw, FullWindowOffsetsSpanTheSegment) {
    Rng rng(11);
    const double T = 2.0;
    double max_offset = 0.0;
    for (int run = 0; run < 20000; ++run) {
        const auto t = sample_single_tbw(seg(T), three(60, 30, 75), T, rng);
        max_offset = std::max(max_offset, std::abs(t.index[1] / 30.0 - t.index[0] / 60.0));
    }
    EXPECT_GT(max_offset, 0.9 * T);
    EXPECT_LE(max_offset, T);
}

TEST(Validation, ConfigAndSpecs) {
    TBWConfig cfg;
    cfg.segments = 0;
    EXPECT_THROW(cfg.validate(), InvalidArgument);
    cfg = {};
    cfg.b_rel = -1;
    EXPECT_THROW(cfg.validate(), InvalidArgument);
    cfg = {};
    cfg.n_test_anchors = 0;
    EXPECT_THROW(cfg.validate(), InvalidArgument);
    EXPECT_THROW((ModalitySpec{"x", 0.0}).validate(), InvalidArgument);
    EXPECT_THROW((ActionSegment{"v", 1.0, 1.0, 0, 0, {}}).validate(), InvalidArgument);
}
