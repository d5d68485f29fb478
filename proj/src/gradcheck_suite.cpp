#include <random>

#include "tbn/gradcheck.hpp"
#include "tbn/model.hpp"
#include "tbn/synthgen.hpp"
#include "tbn/tape.hpp"
#include "tbn/train.hpp"

namespace tbn {

namespace {

using P = Parameter<double>;

P random_param(const std::string& name, Shape shape, Rng& rng, double min_abs = 0.0) {
    std::normal_distribution<double> normal;
    Tensor<double> t(std::move(shape));
    for (auto& v : t.values()) {
        do {
            v = normal(rng);
        } while (std::abs(v) < min_abs);
    }
    return P(name, std::move(t));
}

/// sum(R o y): a scalar whose gradient w.r.t. y is the fixed random tensor R.
Var weighted_sum(Tape<double>& tape, Var y, const Tensor<double>& r) {
    const Var rv = tape.input(r);
    const Var prod = tape.mul(y, rv);
    return tape.mean_over(tape.mean_over(prod, 1), 0);
}

struct OpCase {
    std::string name;
    bool linear;
    std::vector<P> params;
    std::function<Var(Tape<double>&, std::vector<Var>&)> build;
};

GradCheckResult check_op(OpCase& c, const GradCheckSuiteOptions& o, Rng& rng) {
    // Output shape is learned from one dry run to size the weighting tensor.
    Tensor<double> r;
    {
        Tape<double> tape;
        std::vector<Var> vs;
        for (auto& p : c.params) vs.push_back(tape.param(p));
        const Var y = c.build(tape, vs);
        r = Tensor<double>(tape.value(y).shape());
        std::normal_distribution<double> normal;
        for (auto& v : r.values()) v = normal(rng);
    }
    LossFn loss = [&](bool with_backward) {
        Tape<double> tape;
        std::vector<Var> vs;
        for (auto& p : c.params) vs.push_back(tape.param(p));
        const Var y = c.build(tape, vs);
        const Var l = tape.value(y).size() == 1 && tape.value(y).rank() == 1 ? y : weighted_sum(tape, y, r);
        const double value = tape.value(l)[0];
        if (with_backward) tape.backward(l);
        return value;
    };
    std::vector<P*> ptrs;
    for (auto& p : c.params) ptrs.push_back(&p);
    GradCheckOptions go;
    go.tolerance = c.linear ? o.linear_tolerance : o.tolerance;
    go.seed = o.seed;
    return grad_check("op." + c.name, loss, ptrs, go);
}

/// relu whose backward passes 1.5x the true gradient.
Var faulty_relu(Tape<double>& tape, Var x) {
    Tensor<double> y = tape.value(x);
    for (auto& v : y.values()) v = v > 0 ? v : 0;
    return tape.custom(std::move(y), [x](Tape<double>& t, std::size_t self) {
        const auto& dy = t.grad(Var{self});
        const auto& xv = t.value(x);
        auto& dx = t.grad_mut(x);
        for (std::size_t i = 0; i < dy.size(); ++i)
            if (xv[i] > 0) dx[i] += 1.5 * dy[i];
    });
}

Dataset toy_dataset(std::uint64_t seed, bool audio) {
    SynthSpec s;
    s.coding = EvidenceCoding::template_class;
    s.n_classes = 3;
    s.samples_per_class = 2;
    s.duration = 0.5;
    s.modalities = {{"rgb", 12.0, ModalityKind::vector_frame},
                    {"flow", 8.0, ModalityKind::vector_frame},
                    {"audio", 14.0, ModalityKind::vector_frame}};
    s.frame_dim = 4;
    s.offset_frac = 0.1;
    s.evidence_width = 0.1;
    s.held_out_fraction = 0.0;
    s.multitask_nouns = true;
    s.n_nouns = 4;
    s.audio_waveform = audio;
    return generate_dataset(s, seed);
}

GradCheckResult check_model(const std::string& name, const Dataset& ds, ModelConfig cfg,
                            const GradCheckSuiteOptions& o) {
    cfg.hidden_dim = 5;
    cfg.feature_dim = 4;
    cfg.fused_dim = 6;
    cfg.dropout = 0.3;
    cfg.tbw.segments = 2;
    cfg.tbw.b_rel = 0.25;
    Model<double> model(cfg, o.seed);
    std::vector<std::size_t> records;
    for (std::size_t i = 0; i < ds.records.size(); ++i) records.push_back(i);
    LossFn loss = [&](bool with_backward) {
        Rng sampler = substream(o.seed, "sampler");
        Rng dropout = substream(o.seed, "dropout");
        return forward_loss(model, ds, records, sampler, &dropout, with_backward);
    };
    GradCheckOptions go;
    go.tolerance = o.tolerance;
    go.seed = o.seed;
    go.max_coords = 24;
    return grad_check(name, loss, model.parameters(), go);
}

}  // namespace

std::vector<GradCheckResult> gradcheck_suite(const GradCheckSuiteOptions& o) {
    Rng rng = substream(o.seed, "gradcheck", 1);
    std::vector<OpCase> cases;
    const bool fault = o.inject_fault;

    cases.push_back({"affine", true,
                     {random_param("x", {3, 4}, rng), random_param("w", {4, 2}, rng), random_param("b", {2}, rng)},
                     [](Tape<double>& t, std::vector<Var>& v) { return t.affine(v[0], v[1], v[2]); }});
    cases.push_back({"relu", false, {random_param("x", {4, 5}, rng, 0.05)},
                     [fault](Tape<double>& t, std::vector<Var>& v) { return fault ? faulty_relu(t, v[0]) : t.relu(v[0]); }});
    cases.push_back({"sigmoid", false, {random_param("x", {4, 5}, rng)},
                     [](Tape<double>& t, std::vector<Var>& v) { return t.sigmoid(v[0]); }});
    cases.push_back({"mul", false, {random_param("a", {3, 4}, rng), random_param("b", {3, 4}, rng)},
                     [](Tape<double>& t, std::vector<Var>& v) { return t.mul(v[0], v[1]); }});
    cases.push_back({"add", true, {random_param("a", {3, 4}, rng), random_param("b", {3, 4}, rng)},
                     [](Tape<double>& t, std::vector<Var>& v) { return t.add(v[0], v[1]); }});
    cases.push_back({"concat", true,
                     {random_param("a", {3, 2}, rng), random_param("b", {3, 4}, rng), random_param("c", {3, 1}, rng)},
                     [](Tape<double>& t, std::vector<Var>& v) { return t.concat(v); }});
    cases.push_back({"dropout", true, {random_param("x", {6, 5}, rng)}, [seed = o.seed](Tape<double>& t, std::vector<Var>& v) {
                         Rng r = substream(seed, "dropout");
                         return t.dropout(v[0], 0.5, true, r);
                     }});
    cases.push_back({"group_mean", true, {random_param("x", {6, 3}, rng)},
                     [](Tape<double>& t, std::vector<Var>& v) { return t.group_mean(v[0], 3); }});
    cases.push_back({"mean_over.rows", true, {random_param("x", {4, 3}, rng)},
                     [](Tape<double>& t, std::vector<Var>& v) { return t.mean_over(v[0], 0); }});
    cases.push_back({"mean_over.cols", true, {random_param("x", {4, 3}, rng)},
                     [](Tape<double>& t, std::vector<Var>& v) { return t.mean_over(v[0], 1); }});
    cases.push_back({"avg_pool", true, {random_param("x", {2, 64}, rng)},
                     [](Tape<double>& t, std::vector<Var>& v) { return t.avg_pool(v[0], 8, 8, 4); }});
    cases.push_back({"softmax_xent", false, {random_param("logits", {5, 10}, rng)},
                     [](Tape<double>& t, std::vector<Var>& v) {
                         static const int targets[] = {0, 3, 9, 4, 4};
                         return t.softmax_xent(v[0], targets);
                     }});

    std::vector<GradCheckResult> results;
    for (auto& c : cases) results.push_back(check_op(c, o, rng));

    // Fusion heads in isolation: features are parameters so their gradients are checked too.
    for (auto fusion : {FusionStrategy::concat, FusionStrategy::context_gate, FusionStrategy::gating}) {
        ModelConfig cfg;
        cfg.modalities = {{"a", 10.0}, {"b", 20.0}, {"c", 30.0}};
        cfg.input_dims = {3, 3, 3};
        cfg.feature_dim = 4;
        cfg.fused_dim = 5;
        cfg.fusion = fusion;
        auto model = std::make_shared<Model<double>>(cfg, o.seed);
        OpCase c{"fusion." + to_string(fusion), false,
                 {random_param("m1", {3, 4}, rng), random_param("m2", {3, 4}, rng), random_param("m3", {3, 4}, rng)},
                 [model](Tape<double>& t, std::vector<Var>& v) { return model->fuse(t, v); }};
        auto r = check_op(c, o, rng);
        results.push_back(r);
        // Fusion weights themselves, with fixed feature inputs.
        Tensor<double> feats[3];
        for (auto& f : feats) f = random_param("f", {3, 4}, rng).value;
        Tensor<double> weight({3, 5});
        std::normal_distribution<double> normal;
        for (auto& v : weight.values()) v = normal(rng);
        LossFn loss = [&](bool with_backward) {
            Tape<double> tape;
            std::vector<Var> vs;
            for (auto& f : feats) vs.push_back(tape.input(f));
            const Var l = weighted_sum(tape, model->fuse(tape, vs), weight);
            const double value = tape.value(l)[0];
            if (with_backward) tape.backward(l);
            return value;
        };
        std::vector<P*> fusion_params;
        for (auto* p : model->parameters()) {
            if (p->name.rfind("fusion.", 0) == 0) fusion_params.push_back(p);
        }
        GradCheckOptions go;
        go.tolerance = o.tolerance;
        go.seed = o.seed;
        results.push_back(grad_check("fusion." + to_string(fusion) + ".weights", loss, fusion_params, go));
    }

    const Dataset ds = toy_dataset(o.seed, false);
    for (auto fusion : {FusionStrategy::concat, FusionStrategy::context_gate, FusionStrategy::gating}) {
        auto cfg = model_config_for(ds, {});
        cfg.fusion = fusion;
        results.push_back(check_model("forward_loss." + to_string(fusion), ds, cfg, o));
    }
    if (o.include_audio) {
        const Dataset ads = toy_dataset(o.seed, true);
        auto cfg = model_config_for(ads, {"rgb", "audio_wave"});
        results.push_back(check_model("forward_loss.audio", ads, cfg, o));
    }
    return results;
}

}  // namespace tbn
