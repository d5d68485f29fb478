#include "tbn/model.hpp"

#include <cmath>
#include <random>

#include "tbn/error.hpp"
#include "tbn/rng.hpp"

namespace tbn {

std::string to_string(FusionStrategy f) {
    switch (f) {
        case FusionStrategy::concat: return "concat";
        case FusionStrategy::context_gate: return "context-gate";
        case FusionStrategy::gating: return "gating";
    }
    return "concat";
}

FusionStrategy parse_fusion(const std::string& s) {
    if (s == "concat") return FusionStrategy::concat;
    if (s == "context-gate") return FusionStrategy::context_gate;
    if (s == "gating") return FusionStrategy::gating;
    throw ConfigError("fusion must be one of concat, context-gate, gating; got '" + s + "'");
}

std::size_t ModelConfig::raw_input_dim(std::size_t m) const {
    return modalities.at(m).kind == ModalityKind::audio_waveform ? kSpectrogramInput : input_dims.at(m);
}

void ModelConfig::validate() const {
    if (modalities.empty()) throw ConfigError("model needs at least one modality");
    if (input_dims.size() != modalities.size()) throw ConfigError("input_dims must have one entry per modality");
    for (std::size_t m = 0; m < modalities.size(); ++m) {
        modalities[m].validate();
        if (modalities[m].kind == ModalityKind::vector_frame && input_dims[m] == 0) {
            throw ConfigError("modality '" + modalities[m].id + "' has input_dim 0");
        }
    }
    if (hidden_dim == 0 || feature_dim == 0 || fused_dim == 0) throw ConfigError("layer widths must be > 0");
    if (n_verbs < 1 || n_nouns < 1) throw ConfigError("class counts must be >= 1");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
    tbw.validate();
}

nlohmann::json to_json(const ModelConfig& c) {
    nlohmann::json mods = nlohmann::json::array();
    for (std::size_t m = 0; m < c.modalities.size(); ++m) {
        mods.push_back({{"id", c.modalities[m].id},
                        {"rate", c.modalities[m].rate},
                        {"kind", c.modalities[m].kind == ModalityKind::audio_waveform ? "audio-waveform" : "vector-frame"},
                        {"input_dim", c.input_dims[m]}});
    }
    return {{"modalities", mods},
            {"hidden_dim", c.hidden_dim},
            {"feature_dim", c.feature_dim},
            {"fused_dim", c.fused_dim},
            {"fusion", to_string(c.fusion)},
            {"n_verbs", c.n_verbs},
            {"n_nouns", c.n_nouns},
            {"dropout", c.dropout},
            {"segments", c.tbw.segments},
            {"b_rel", c.tbw.b_rel}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
    ModelConfig c;
    try {
        for (const auto& m : j.at("modalities")) {
            const auto kind = m.at("kind").get<std::string>();
            c.modalities.push_back({m.at("id").get<std::string>(), m.at("rate").get<double>(),
                                    kind == "audio-waveform" ? ModalityKind::audio_waveform : ModalityKind::vector_frame});
            c.input_dims.push_back(m.at("input_dim").get<std::size_t>());
        }
        c.hidden_dim = j.at("hidden_dim").get<std::size_t>();
        c.feature_dim = j.at("feature_dim").get<std::size_t>();
        c.fused_dim = j.at("fused_dim").get<std::size_t>();
        c.fusion = parse_fusion(j.at("fusion").get<std::string>());
        c.n_verbs = j.at("n_verbs").get<int>();
        c.n_nouns = j.at("n_nouns").get<int>();
        c.dropout = j.at("dropout").get<double>();
        c.tbw.segments = j.at("segments").get<int>();
        c.tbw.b_rel = j.at("b_rel").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("model hyperparameters: ") + e.what());
    }
    c.validate();
    return c;
}

namespace {

template <typename T>
Parameter<T> make_param(std::string name, Shape shape) {
    return Parameter<T>(std::move(name), Tensor<T>(std::move(shape)));
}

template <typename T>
void init_uniform(Parameter<T>& p, std::size_t fan_in, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (auto& v : p.value.values()) v = static_cast<T>(dist(rng));
}

}  // namespace

template <typename T>
Model<T>::Model(ModelConfig config, std::uint64_t seed) : config_(std::move(config)) {
    config_.validate();
    init_parameters(seed);
}

template <typename T>
void Model<T>::init_parameters(std::uint64_t seed) {
    const auto& c = config_;
    const std::size_t M = c.modalities.size();
    const std::size_t H = c.hidden_dim, D = c.feature_dim, F = c.fused_dim;
    extractors_.clear();
    for (std::size_t m = 0; m < M; ++m) {
        const std::string p = "extractor." + c.modalities[m].id + ".";
        const std::size_t in = c.modalities[m].kind == ModalityKind::audio_waveform
                                   ? kSpectrogramInput / (kAudioPool * kAudioPool)
                                   : c.input_dims[m];
        extractors_.push_back({make_param<T>(p + "w1", {in, H}), make_param<T>(p + "b1", {H}),
                               make_param<T>(p + "w2", {H, D}), make_param<T>(p + "b2", {D})});
    }
    branch_w_.clear();
    branch_b_.clear();
    branch_gate_w_.clear();
    branch_gate_b_.clear();
    if (c.fusion == FusionStrategy::gating) {
        for (std::size_t m = 0; m < M; ++m) {
            const std::string p = "fusion." + c.modalities[m].id + ".";
            branch_w_.push_back(make_param<T>(p + "w", {D, F}));
            branch_b_.push_back(make_param<T>(p + "b", {F}));
            branch_gate_w_.push_back(make_param<T>(p + "gate_w", {M * D, F}));
            branch_gate_b_.push_back(make_param<T>(p + "gate_b", {F}));
        }
    } else {
        fuse_w_ = make_param<T>("fusion.w", {M * D, F});
        fuse_b_ = make_param<T>("fusion.b", {F});
        if (c.fusion == FusionStrategy::context_gate) {
            gate_w_ = make_param<T>("fusion.gate_w", {F, F});
            gate_b_ = make_param<T>("fusion.gate_b", {F});
        }
    }
    verb_w_ = make_param<T>("head.verb.w", {F, static_cast<std::size_t>(c.n_verbs)});
    verb_b_ = make_param<T>("head.verb.b", {static_cast<std::size_t>(c.n_verbs)});
    noun_w_ = make_param<T>("head.noun.w", {F, static_cast<std::size_t>(c.n_nouns)});
    noun_b_ = make_param<T>("head.noun.b", {static_cast<std::size_t>(c.n_nouns)});

    // Biases take the fan-in of the weight matrix that precedes them in parameters().
    Rng rng = substream(seed, "init");
    std::size_t fan_in = 1;
    for (Parameter<T>* p : parameters()) {
        if (p->value.rank() == 2) fan_in = p->value.dim(0);
        init_uniform(*p, fan_in, rng);
    }
}

template <typename T>
std::vector<Parameter<T>*> Model<T>::parameters() {
    std::vector<Parameter<T>*> out;
    for (auto& e : extractors_) out.insert(out.end(), {&e.w1, &e.b1, &e.w2, &e.b2});
    if (config_.fusion == FusionStrategy::gating) {
        for (std::size_t m = 0; m < branch_w_.size(); ++m) {
            out.insert(out.end(), {&branch_w_[m], &branch_b_[m], &branch_gate_w_[m], &branch_gate_b_[m]});
        }
    } else {
        out.insert(out.end(), {&fuse_w_, &fuse_b_});
        if (config_.fusion == FusionStrategy::context_gate) out.insert(out.end(), {&gate_w_, &gate_b_});
    }
    out.insert(out.end(), {&verb_w_, &verb_b_, &noun_w_, &noun_b_});
    return out;
}

template <typename T>
std::vector<const Parameter<T>*> Model<T>::parameters() const {
    auto ps = const_cast<Model*>(this)->parameters();
    return {ps.begin(), ps.end()};
}

template <typename T>
Parameter<T>& Model<T>::parameter(const std::string& name) {
    for (auto* p : parameters()) {
        if (p->name == name) return *p;
    }
    throw InvalidArgument("model has no parameter '" + name + "'");
}

template <typename T>
Var Model<T>::extract(Tape<T>& tape, std::size_t m, Var x) {
    auto& e = extractors_.at(m);
    if (tape.value(x).cols() != config_.raw_input_dim(m)) {
        throw InvalidArgument("modality '" + config_.modalities[m].id + "' expects inputs of width " +
                              std::to_string(config_.raw_input_dim(m)) + ", got " + shape_str(tape.value(x).shape()));
    }
    if (config_.modalities[m].kind == ModalityKind::audio_waveform) x = tape.avg_pool(x, 256, 256, kAudioPool);
    Var h = tape.relu(tape.affine(x, tape.param(e.w1), tape.param(e.b1)));
    return tape.relu(tape.affine(h, tape.param(e.w2), tape.param(e.b2)));
}

template <typename T>
Var Model<T>::fuse(Tape<T>& tape, std::span<const Var> features) {
    if (features.size() != config_.modalities.size()) {
        throw ShapeError("fuse: expected " + std::to_string(config_.modalities.size()) + " features, got " +
                         std::to_string(features.size()));
    }
    for (Var f : features) {
        if (tape.value(f).cols() != config_.feature_dim) {
            throw ShapeError("fuse: feature " + shape_str(tape.value(f).shape()) + " does not have width " +
                             std::to_string(config_.feature_dim));
        }
    }
    const Var all = tape.concat(features);
    if (config_.fusion == FusionStrategy::gating) {
        Var out{};
        for (std::size_t m = 0; m < features.size(); ++m) {
            const Var h = tape.relu(tape.affine(features[m], tape.param(branch_w_[m]), tape.param(branch_b_[m])));
            const Var z = tape.sigmoid(tape.affine(all, tape.param(branch_gate_w_[m]), tape.param(branch_gate_b_[m])));
            const Var zh = tape.mul(z, h);
            out = m == 0 ? zh : tape.add(out, zh);
        }
        return out;
    }
    const Var h = tape.relu(tape.affine(all, tape.param(fuse_w_), tape.param(fuse_b_)));
    if (config_.fusion == FusionStrategy::concat) return h;
    const Var z = tape.sigmoid(tape.affine(h, tape.param(gate_w_), tape.param(gate_b_)));
    return tape.mul(z, h);
}

template <typename T>
ForwardOut Model<T>::heads(Tape<T>& tape, Var fused) {
    return {tape.affine(fused, tape.param(verb_w_), tape.param(verb_b_)),
            tape.affine(fused, tape.param(noun_w_), tape.param(noun_b_))};
}

template <typename T>
ForwardOut Model<T>::forward(Tape<T>& tape, const std::vector<Tensor<T>>& inputs, std::size_t group, bool training,
                             Rng* dropout_rng) {
    if (inputs.size() != config_.modalities.size()) {
        throw InvalidArgument("forward: expected " + std::to_string(config_.modalities.size()) + " inputs, got " +
                              std::to_string(inputs.size()));
    }
    std::vector<Var> features;
    for (std::size_t m = 0; m < inputs.size(); ++m) features.push_back(extract(tape, m, tape.input(inputs[m])));
    Var fused = fuse(tape, features);
    if (training && config_.dropout > 0.0) {
        if (!dropout_rng) throw InvalidArgument("forward: training with dropout needs an rng");
        fused = tape.dropout(fused, config_.dropout, true, *dropout_rng);
    }
    const ForwardOut per_tbw = heads(tape, fused);
    return {tape.group_mean(per_tbw.verb, group), tape.group_mean(per_tbw.noun, group)};
}

template <typename T>
Var Model<T>::loss(Tape<T>& tape, const ForwardOut& out, std::span<const int> verbs, std::span<const int> nouns) {
    return tape.add(tape.softmax_xent(out.verb, verbs), tape.softmax_xent(out.noun, nouns));
}

template <typename T>
Checkpoint Model<T>::to_checkpoint() const {
    Checkpoint ck;
    ck.hyperparameters = to_json(config_);
    for (const auto* p : parameters()) ck.tensors.push_back({p->name, p->value});
    return ck;
}

template <typename T>
Model<T> Model<T>::from_checkpoint(const Checkpoint& ck) {
    Model<T> model;
    model.config_ = model_config_from_json(ck.hyperparameters);
    model.init_parameters(0);
    for (auto* p : model.parameters()) {
        const NamedTensor* t = ck.find(p->name);
        if (!t) throw ConfigError("checkpoint is missing tensor '" + p->name + "'");
        Tensor<T> v = std::visit([](const auto& x) { return x.template cast<T>(); }, t->tensor);
        if (v.shape() != p->value.shape()) {
            throw ShapeError("checkpoint tensor '" + p->name + "' has shape " + shape_str(v.shape()) + ", expected " +
                             shape_str(p->value.shape()));
        }
        p->value = std::move(v);
    }
    if (ck.tensors.size() != model.parameters().size()) {
        throw ConfigError("checkpoint has " + std::to_string(ck.tensors.size()) + " tensors, model expects " +
                          std::to_string(model.parameters().size()));
    }
    return model;
}

template <typename T>
template <typename U>
Model<U> Model<T>::cast() const {
    Model<U> out;
    out.config_ = config_;
    out.init_parameters(0);
    auto dst = out.parameters();
    auto src = parameters();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i]->value = src[i]->value.template cast<U>();
    return out;
}

template class Model<float>;
template class Model<double>;
template Model<double> Model<float>::cast<double>() const;
template Model<float> Model<double>::cast<float>() const;
template Model<float> Model<float>::cast<float>() const;
template Model<double> Model<double>::cast<double>() const;

}  // namespace tbn
