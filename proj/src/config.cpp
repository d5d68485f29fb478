#include "tbn/config.hpp"

#include <charconv>

#include "tbn/error.hpp"
#include "tbn/io.hpp"

namespace tbn {

namespace {

using json = nlohmann::json;

/// Reads known keys of one section; anything left over is an error.
class Section {
public:
    Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError("'" + path_ + "' must be an object");
    }

    template <typename V>
    void get(const char* key, V& out) {
        seen_.push_back(key);
        if (!j_.contains(key)) return;
        try {
            out = j_.at(key).get<V>();
        } catch (const json::exception& e) {
            throw ConfigError("'" + qualified(key) + "': " + e.what());
        }
    }

    const json* child(const char* key) {
        seen_.push_back(key);
        return j_.contains(key) ? &j_.at(key) : nullptr;
    }

    std::string qualified(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    void finish() const {
        for (const auto& [key, _] : j_.items()) {
            if (std::find(seen_.begin(), seen_.end(), key) == seen_.end()) {
                throw ConfigError("unknown config key '" + qualified(key) + "'");
            }
        }
    }

private:
    const json& j_;
    std::string path_;
    std::vector<std::string> seen_;
};

}  // namespace

void RunConfig::validate() const {
    synth.validate();
    if (model.hidden_dim == 0 || model.feature_dim == 0 || model.fused_dim == 0) {
        throw ConfigError("model widths must be > 0");
    }
    if (!(model.dropout >= 0.0 && model.dropout < 1.0)) throw ConfigError("model.dropout must lie in [0, 1)");
    TBWConfig t{tbw.segments, tbw.b_rel, SamplingMode::train_random, tbw.n_test_anchors};
    try {
        t.validate();
    } catch (const InvalidArgument& e) {
        throw ConfigError(std::string("tbw: ") + e.what());
    }
    if (tbw.test_placement != "spread" && tbw.test_placement != "sync") {
        throw ConfigError("tbw.test_placement must be 'spread' or 'sync'");
    }
    train_options().validate();
    if (eval.aggregation != "logits" && eval.aggregation != "softmax") {
        throw ConfigError("eval.aggregation must be 'logits' or 'softmax'");
    }
    if (sweep.runs < 1) throw ConfigError("sweep.runs must be >= 1");
    for (const auto& w : sweep.widths) parse_width(w);
    if (!(gradcheck.tolerance > 0.0 && gradcheck.linear_tolerance > 0.0)) {
        throw ConfigError("gradcheck tolerances must be > 0");
    }
}

TrainOptions RunConfig::train_options() const {
    TrainOptions o;
    o.epochs = train.epochs;
    o.batch_size = train.batch_size;
    o.lr = train.lr;
    o.momentum = train.momentum;
    o.decay_epoch = train.decay_epoch;
    o.decay_factor = train.decay_factor;
    o.seed = seed;
    o.eval_every = train.eval_every;
    o.eval_placement = tbw.test_placement == "sync" ? TestPlacement::synchronous : TestPlacement::spread;
    return o;
}

PredictOptions RunConfig::predict_options() const {
    PredictOptions p;
    p.n_test_anchors = tbw.n_test_anchors;
    p.placement = tbw.test_placement == "sync" ? TestPlacement::synchronous : TestPlacement::spread;
    p.aggregation = eval.aggregation == "softmax" ? TestAggregation::softmax : TestAggregation::logits;
    return p;
}

ModelConfig RunConfig::model_config(const Dataset& ds) const {
    ModelConfig c = model_config_for(ds, model.modalities);
    c.hidden_dim = model.hidden_dim;
    c.feature_dim = model.feature_dim;
    c.fused_dim = model.fused_dim;
    c.fusion = model.fusion;
    c.dropout = model.dropout;
    c.tbw.segments = tbw.segments;
    c.tbw.b_rel = tbw.b_rel;
    c.tbw.n_test_anchors = tbw.n_test_anchors;
    c.validate();
    return c;
}

std::vector<SweepWidth> RunConfig::sweep_widths() const {
    if (sweep.widths.empty()) return default_sweep_widths();
    std::vector<SweepWidth> out;
    for (const auto& w : sweep.widths) out.push_back(parse_width(w));
    return out;
}

SweepWidth parse_width(const std::string& s) {
    if (s == "sync" || s == "0") return {"sync", 0.0};
    auto number = [&](std::string_view v) {
        double x = 0.0;
        const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
        if (ec != std::errc() || p != v.data() + v.size() || !(x >= 0.0)) {
            throw ConfigError("bad TBW width '" + s + "' (expected sync, T, T/n, kT/n or a number)");
        }
        return x;
    };
    const auto t = s.find('T');
    if (t == std::string::npos) return {s, number(s)};
    const double numer = t == 0 ? 1.0 : number(std::string_view(s).substr(0, t));
    if (t + 1 == s.size()) return {s, numer};
    if (s[t + 1] != '/') throw ConfigError("bad TBW width '" + s + "'");
    const double denom = number(std::string_view(s).substr(t + 2));
    if (denom == 0.0) throw ConfigError("bad TBW width '" + s + "'");
    return {s, numer / denom};
}

json to_json(const RunConfig& c) {
    return {{"seed", c.seed},
            {"output_dir", c.output_dir},
            {"synth", to_json(c.synth)},
            {"data", {{"manifest", c.data.manifest}}},
            {"model",
             {{"fusion", to_string(c.model.fusion)},
              {"modalities", c.model.modalities},
              {"hidden_dim", c.model.hidden_dim},
              {"feature_dim", c.model.feature_dim},
              {"fused_dim", c.model.fused_dim},
              {"dropout", c.model.dropout}}},
            {"tbw",
             {{"segments", c.tbw.segments},
              {"b_rel", c.tbw.b_rel},
              {"n_test_anchors", c.tbw.n_test_anchors},
              {"test_placement", c.tbw.test_placement}}},
            {"train",
             {{"epochs", c.train.epochs},
              {"batch_size", c.train.batch_size},
              {"lr", c.train.lr},
              {"momentum", c.train.momentum},
              {"decay_epoch", c.train.decay_epoch},
              {"decay_factor", c.train.decay_factor},
              {"eval_every", c.train.eval_every}}},
            {"eval",
             {{"checkpoint", c.eval.checkpoint},
              {"ensemble", c.eval.ensemble},
              {"subset_tag", c.eval.subset_tag},
              {"aggregation", c.eval.aggregation},
              {"split", c.eval.split}}},
            {"sweep",
             {{"checkpoint", c.sweep.checkpoint},
              {"widths", c.sweep.widths},
              {"runs", c.sweep.runs},
              {"split", c.sweep.split},
              {"plot", c.sweep.plot}}},
            {"gradcheck",
             {{"tolerance", c.gradcheck.tolerance},
              {"linear_tolerance", c.gradcheck.linear_tolerance},
              {"inject_fault", c.gradcheck.inject_fault},
              {"include_audio", c.gradcheck.include_audio}}}};
}

RunConfig run_config_from_json(const json& j) {
    RunConfig c;
    Section root(j, "");
    root.get("seed", c.seed);
    root.get("output_dir", c.output_dir);
    if (const json* s = root.child("synth")) c.synth = synth_spec_from_json(*s, c.synth);
    if (const json* s = root.child("data")) {
        Section d(*s, "data");
        d.get("manifest", c.data.manifest);
        d.finish();
    }
    if (const json* s = root.child("model")) {
        Section m(*s, "model");
        std::string fusion = to_string(c.model.fusion);
        m.get("fusion", fusion);
        c.model.fusion = parse_fusion(fusion);
        m.get("modalities", c.model.modalities);
        m.get("hidden_dim", c.model.hidden_dim);
        m.get("feature_dim", c.model.feature_dim);
        m.get("fused_dim", c.model.fused_dim);
        m.get("dropout", c.model.dropout);
        m.finish();
    }
    if (const json* s = root.child("tbw")) {
        Section t(*s, "tbw");
        t.get("segments", c.tbw.segments);
        t.get("b_rel", c.tbw.b_rel);
        t.get("n_test_anchors", c.tbw.n_test_anchors);
        t.get("test_placement", c.tbw.test_placement);
        t.finish();
    }
    if (const json* s = root.child("train")) {
        Section t(*s, "train");
        t.get("epochs", c.train.epochs);
        t.get("batch_size", c.train.batch_size);
        t.get("lr", c.train.lr);
        t.get("momentum", c.train.momentum);
        t.get("decay_epoch", c.train.decay_epoch);
        t.get("decay_factor", c.train.decay_factor);
        t.get("eval_every", c.train.eval_every);
        t.finish();
    }
    if (const json* s = root.child("eval")) {
        Section e(*s, "eval");
        e.get("checkpoint", c.eval.checkpoint);
        e.get("ensemble", c.eval.ensemble);
        e.get("subset_tag", c.eval.subset_tag);
        e.get("aggregation", c.eval.aggregation);
        e.get("split", c.eval.split);
        e.finish();
    }
    if (const json* s = root.child("sweep")) {
        Section w(*s, "sweep");
        w.get("checkpoint", c.sweep.checkpoint);
        w.get("widths", c.sweep.widths);
        w.get("runs", c.sweep.runs);
        w.get("split", c.sweep.split);
        w.get("plot", c.sweep.plot);
        w.finish();
    }
    if (const json* s = root.child("gradcheck")) {
        Section g(*s, "gradcheck");
        g.get("tolerance", c.gradcheck.tolerance);
        g.get("linear_tolerance", c.gradcheck.linear_tolerance);
        g.get("inject_fault", c.gradcheck.inject_fault);
        g.get("include_audio", c.gradcheck.include_audio);
        g.finish();
    }
    root.finish();
    return c;
}

RunConfig load_run_config(const std::string& path) {
    json j;
    try {
        j = read_json_file(path);
    } catch (const IoError& e) {
        throw ConfigError(e.what());
    }
    try {
        return run_config_from_json(j);
    } catch (const ConfigError& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

}  // namespace tbn
