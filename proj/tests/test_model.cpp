#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <set>

#include "tbn/error.hpp"
#include "tbn/model.hpp"
#include "tbn/synthgen.hpp"
#include "tbn/train.hpp"

using namespace tbn;

namespace {

ModelConfig small_config(FusionStrategy f, std::size_t d = 6) {
    ModelConfig c;
    c.modalities = {{"rgb", 60}, {"flow", 30}, {"audio", 75}};
    c.input_dims = {5, 4, 3};
    c.hidden_dim = 7;
    c.feature_dim = d;
    c.fused_dim = 9;
    c.fusion = f;
    c.n_verbs = 4;
    c.n_nouns = 3;
    c.dropout = 0.0;
    return c;
}

std::vector<Tensor<float>> random_inputs(const ModelConfig& c, std::size_t rows, std::uint64_t seed) {
    Rng g(seed);
    std::normal_distribution<float> d;
    std::vector<Tensor<float>> out;
    for (std::size_t m = 0; m < c.modalities.size(); ++m) {
        Tensor<float> t({rows, c.raw_input_dim(m)});
        for (auto& v : t.values()) v = d(g);
        out.push_back(std::move(t));
    }
    return out;
}

Dataset small_dataset(int per_class = 10, std::uint64_t seed = 1) {
    auto spec = SynthSpec::standard();
    spec.samples_per_class = per_class;
    return generate_dataset(spec, seed);
}

TrainOptions quick_options(int epochs) {
    TrainOptions o;
    o.epochs = epochs;
    o.lr = 0.1;
    o.momentum = 0.9;
    o.decay_epoch = 1000;
    o.eval_split = "";
    o.seed = 3;
    return o;
}

ModelConfig bench_config(const Dataset& ds) {
    auto c = model_config_for(ds, {});
    c.hidden_dim = 32;
    c.feature_dim = 32;
    c.fused_dim = 64;
    c.dropout = 0.0;
    return c;
}

}  // namespace

TEST(Extractor, ZeroFinalLayerGivesZeroFeature) {
    Model<float> m(small_config(FusionStrategy::concat), 1);
    m.extractor(0).w2.value.fill(0.0f);
    m.extractor(0).b2.value.fill(0.0f);
    Tape<float> tape;
    const auto f = m.extract(tape, 0, tape.input(random_inputs(m.config(), 4, 2)[0]));
    for (float v : tape.value(f).values()) EXPECT_EQ(v, 0.0f);
}

TEST(Extractor, IdenticalSamplesGiveIdenticalFeatures) {
    Model<float> m(small_config(FusionStrategy::concat), 1);
    auto x = random_inputs(m.config(), 1, 3)[1];
    Tensor<float> stacked({3, x.cols()});
    for (std::size_t r = 0; r < 3; ++r) std::copy(x.row(0).begin(), x.row(0).end(), stacked.row(r).begin());
    Tape<float> tape;
    const auto& f = tape.value(m.extract(tape, 1, tape.input(stacked)));
    for (std::size_t r = 1; r < 3; ++r) {
        EXPECT_TRUE(std::equal(f.row(0).begin(), f.row(0).end(), f.row(r).begin()));
    }
}

TEST(Extractor, RejectsWrongInputWidth) {
    Model<float> m(small_config(FusionStrategy::concat), 1);
    Tape<float> tape;
    EXPECT_THROW(m.extract(tape, 0, tape.input(Tensor<float>({2, 99}))), InvalidArgument);
}

TEST(Model, SharedParametersAreBoundOncePerForward) {
    for (auto f : {FusionStrategy::concat, FusionStrategy::context_gate, FusionStrategy::gating}) {
        Model<float> m(small_config(f), 1);
        Tape<float> tape;
        m.forward(tape, random_inputs(m.config(), 2 * 5, 4), 5, false, nullptr);  // B=2, K=5
        std::set<const Parameter<float>*> bound;
        std::size_t bindings = 0;
        for (std::size_t i = 0; i < tape.size(); ++i) {
            if (const auto* p = tape.bound_parameter(Var{i})) {
                bound.insert(p);
                ++bindings;
            }
        }
        const auto params = m.parameters();
        EXPECT_EQ(bindings, params.size()) << to_string(f);
        EXPECT_EQ(bound, std::set<const Parameter<float>*>(params.begin(), params.end()));
    }
}

TEST(Model, OnePredictionPerTbw) {
    Model<float> m(small_config(FusionStrategy::gating), 1);
    Tape<float> tape;
    std::vector<Var> feats(3, tape.input(Tensor<float>({6, 6}, 0.5f)));
    const auto out = m.heads(tape, m.fuse(tape, feats));
    EXPECT_EQ(tape.value(out.verb).shape(), (Shape{6, 4}));
    EXPECT_EQ(tape.value(out.noun).shape(), (Shape{6, 3}));
    const auto agg = m.forward(tape, random_inputs(m.config(), 6, 5), 3, false, nullptr);
    EXPECT_EQ(tape.value(agg.verb).shape(), (Shape{2, 4}));
}

TEST(Fusion, ConcatShapeArithmetic) {
    auto c = small_config(FusionStrategy::concat, 1024);
    c.fused_dim = 512;
    c.hidden_dim = 4;
    Model<float> m(c, 1);
    EXPECT_EQ(m.parameter("fusion.w").value.shape(), (Shape{3072, 512}));
}

TEST(Fusion, ZeroFeaturesZeroBiasGiveZero) {
    for (auto f : {FusionStrategy::concat, FusionStrategy::context_gate, FusionStrategy::gating}) {
        Model<double> m(small_config(f), 2);
        for (auto* p : m.parameters()) {
            if (p->name.rfind("fusion.", 0) == 0 && p->value.rank() == 1 && p->name.find("gate") == std::string::npos) {
                p->value.fill(0.0);
            }
        }
        Tape<double> tape;
        std::vector<Var> feats(3, tape.input(Tensor<double>({2, 6})));
        for (double v : tape.value(m.fuse(tape, feats)).values()) EXPECT_EQ(v, 0.0) << to_string(f);
    }
}

TEST(Fusion, ContextGateAtZeroWeightsHalvesConcat) {
    Model<double> gated(small_config(FusionStrategy::context_gate), 3);
    Model<double> plain(small_config(FusionStrategy::concat), 3);
    plain.parameter("fusion.w").value = gated.parameter("fusion.w").value;
    plain.parameter("fusion.b").value = gated.parameter("fusion.b").value;
    gated.parameter("fusion.gate_w").value.fill(0.0);
    gated.parameter("fusion.gate_b").value.fill(0.0);
    const auto xs = random_inputs(gated.config(), 3, 6);
    Tape<double> t1, t2;
    std::vector<Var> f1, f2;
    for (std::size_t m = 0; m < 3; ++m) {
        Tensor<double> feat({3, 6});
        for (std::size_t i = 0; i < feat.size(); ++i) feat[i] = std::sin(static_cast<double>(i + 7 * m));
        f1.push_back(t1.input(feat));
        f2.push_back(t2.input(feat));
    }
    const auto& a = t1.value(gated.fuse(t1, f1));
    const auto& h = t2.value(plain.fuse(t2, f2));
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_DOUBLE_EQ(a[i], 0.5 * h[i]);
}

TEST(Fusion, SaturatedGatesSelectOneBranch) {
    Model<double> m(small_config(FusionStrategy::gating), 4);
    for (std::size_t i = 0; i < 3; ++i) {
        const auto id = m.config().modalities[i].id;
        m.parameter("fusion." + id + ".gate_w").value.fill(0.0);
        m.parameter("fusion." + id + ".gate_b").value.fill(i == 0 ? 50.0 : -50.0);
    }
    Tape<double> tape;
    std::vector<Var> feats;
    for (std::size_t i = 0; i < 3; ++i) {
        Tensor<double> feat({2, 6});
        for (std::size_t k = 0; k < feat.size(); ++k) feat[k] = std::cos(static_cast<double>(k * (i + 1)));
        feats.push_back(tape.input(feat));
    }
    const auto& out = tape.value(m.fuse(tape, feats));
    const auto& h1 = tape.value(tape.relu(tape.affine(feats[0], tape.param(m.parameter("fusion.rgb.w")),
                                                      tape.param(m.parameter("fusion.rgb.b")))));
    for (std::size_t k = 0; k < out.size(); ++k) EXPECT_NEAR(out[k], h1[k], 1e-12);
}

TEST(Fusion, OutputWidthIsStrategyIndependent) {
    std::set<Shape> shapes;
    for (auto f : {FusionStrategy::concat, FusionStrategy::context_gate, FusionStrategy::gating}) {
        Model<float> m(small_config(f), 5);
        Tape<float> tape;
        std::vector<Var> feats(3, tape.input(Tensor<float>({4, 6}, 1.0f)));
        shapes.insert(tape.value(m.fuse(tape, feats)).shape());
    }
    EXPECT_EQ(shapes.size(), 1u);
    EXPECT_EQ(*shapes.begin(), (Shape{4, 9}));
}

TEST(Fusion, RejectsFeatureWidthMismatch) {
    Model<float> m(small_config(FusionStrategy::concat), 5);
    Tape<float> tape;
    std::vector<Var> feats(3, tape.input(Tensor<float>({4, 5})));
    EXPECT_THROW(m.fuse(tape, feats), ShapeError);
}

TEST(Aggregation, SingleTbwIsIdentity) {
    Model<float> m(small_config(FusionStrategy::concat), 6);
    const auto xs = random_inputs(m.config(), 4, 7);
    Tape<float> t1;
    const auto agg = m.forward(t1, xs, 1, false, nullptr);
    Tape<float> t2;
    std::vector<Var> feats;
    for (std::size_t i = 0; i < 3; ++i) feats.push_back(m.extract(t2, i, t2.input(xs[i])));
    const auto raw = m.heads(t2, m.fuse(t2, feats));
    EXPECT_EQ(t1.value(agg.verb), t2.value(raw.verb));
}

TEST(Aggregation, PermutingTbwsIsBitIdentical) {
    Model<float> m(small_config(FusionStrategy::gating), 8);
    const std::size_t K = 7;
    const auto xs = random_inputs(m.config(), 2 * K, 9);
    std::vector<std::size_t> perm(K);
    std::iota(perm.begin(), perm.end(), 0);
    Tape<float> base_tape;
    const auto base = base_tape.value(m.forward(base_tape, xs, K, false, nullptr).verb);
    Rng g(10);
    for (int trial = 0; trial < 20; ++trial) {
        std::shuffle(perm.begin(), perm.end(), g);
        auto ys = xs;
        for (std::size_t mod = 0; mod < 3; ++mod) {
            for (std::size_t b = 0; b < 2; ++b) {
                for (std::size_t k = 0; k < K; ++k) {
                    const auto src = xs[mod].row(b * K + perm[k]);
                    std::copy(src.begin(), src.end(), ys[mod].row(b * K + k).begin());
                }
            }
        }
        Tape<float> tape;
        const auto out = tape.value(m.forward(tape, ys, K, false, nullptr).verb);
        EXPECT_EQ(std::memcmp(out.values().data(), base.values().data(), base.size() * sizeof(float)), 0);
    }
}

TEST(ForwardLoss, UntrainedLossNearTwoLnEight) {
    const auto ds = small_dataset();
    auto cfg = model_config_for(ds, {});
    Model<float> m(cfg, 11);
    Rng sampler(12), drop(13);
    const auto train = ds.split_indices("train");
    const double l = forward_loss(m, ds, std::span<const std::size_t>(train), sampler, &drop, false);
    EXPECT_NEAR(l, 2.0 * std::log(8.0), 0.2);
    EXPECT_TRUE(std::isfinite(l));
}

TEST(Training, ZeroLearningRateKeepsInitialWeights) {
    const auto ds = small_dataset();
    const auto cfg = bench_config(ds);
    auto opts = quick_options(2);
    opts.lr = 0.0;
    const auto result = train(cfg, ds, opts);
    const Model<float> init(cfg, opts.seed);
    const auto a = init.parameters();
    const auto b = result.model.parameters();
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i]->value, b[i]->value) << a[i]->name;
}

TEST(Training, SameSeedSameLog) {
    const auto ds = small_dataset();
    const auto cfg = bench_config(ds);
    auto opts = quick_options(3);
    const auto a = train(cfg, ds, opts);
    const auto b = train(cfg, ds, opts);
    ASSERT_EQ(a.log.size(), b.log.size());
    for (std::size_t i = 0; i < a.log.size(); ++i) EXPECT_EQ(a.log[i].loss, b.log[i].loss);
}

TEST(Training, LossDecreasesOverFirstEpochs) {
    const auto ds = small_dataset(200);
    const auto result = train(bench_config(ds), ds, quick_options(5));
    std::vector<double> losses;
    for (const auto& row : result.log) {
        if (row.split == "train") losses.push_back(row.loss);
    }
    ASSERT_EQ(losses.size(), 5u);
    for (std::size_t i = 1; i < losses.size(); ++i) EXPECT_LT(losses[i], losses[i - 1]) << i;
}

TEST(Predict, DeterministicGivenWeights) {
    const auto ds = small_dataset();
    Model<float> m(bench_config(ds), 14);
    const auto test = ds.split_indices("test");
    PredictOptions o;
    o.placement = TestPlacement::spread;
    const auto a = predict(m, ds, test, o);
    const auto b = predict(m, ds, test, o);
    EXPECT_EQ(a.verb, b.verb);
    EXPECT_EQ(a.noun, b.noun);
}

TEST(Ensemble, OfOneEqualsSingleModel) {
    const auto ds = small_dataset();
    Model<float> m(bench_config(ds), 15);
    const auto test = ds.split_indices("test");
    Model<float>* members[] = {&m};
    const auto single = predict(m, ds, test);
    const auto ens = ensemble_predict(members, ds, test);
    for (std::size_t i = 0; i < single.verb.size(); ++i) EXPECT_NEAR(ens.verb[i], single.verb[i], 1e-12);
}

TEST(Ensemble, IdenticalMembersEqualEither) {
    const auto ds = small_dataset();
    Model<float> a(bench_config(ds), 16), b(bench_config(ds), 16);
    const auto test = ds.split_indices("test");
    Model<float>* members[] = {&a, &b};
    const auto single = predict(a, ds, test);
    const auto ens = ensemble_predict(members, ds, test);
    for (std::size_t i = 0; i < single.verb.size(); ++i) EXPECT_NEAR(ens.verb[i], single.verb[i], 1e-12);
}

TEST(Ensemble, ClassCountMismatchThrows) {
    const auto ds = small_dataset();
    auto cfg = bench_config(ds);
    Model<float> a(cfg, 17);
    cfg.n_verbs = 9;
    Model<float> b(cfg, 17);
    Model<float>* members[] = {&a, &b};
    const auto test = ds.split_indices("test");
    EXPECT_THROW(ensemble_predict(members, ds, test), InvalidArgument);
}

TEST(ModelConfig, JsonRoundTrip) {
    auto c = small_config(FusionStrategy::context_gate);
    c.tbw.b_rel = 0.2;
    c.tbw.segments = 5;
    const auto back = model_config_from_json(to_json(c));
    EXPECT_EQ(to_json(back), to_json(c));
    EXPECT_EQ(parse_fusion("gating"), FusionStrategy::gating);
    EXPECT_ANY_THROW(parse_fusion("late"));
}
