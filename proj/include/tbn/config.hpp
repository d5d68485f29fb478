#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "tbn/model.hpp"
#include "tbn/synthgen.hpp"
#include "tbn/train.hpp"

namespace tbn {

/// Everything a tbnlab command needs. Serialized as nested JSON; unknown keys are rejected.
struct RunConfig {
    std::uint64_t seed = 0;
    std::string output_dir = "tbn_out";

    SynthSpec synth;

    struct Data {
        std::string manifest;  ///< manifest.jsonl or its directory
    } data;

    struct ModelSection {
        FusionStrategy fusion = FusionStrategy::concat;
        std::vector<std::string> modalities;  ///< empty => all dataset modalities, anchor first
        std::size_t hidden_dim = 64;
        std::size_t feature_dim = 64;
        std::size_t fused_dim = 512;
        double dropout = 0.5;
    } model;

    struct Tbw {
        int segments = 3;
        double b_rel = 1.0;
        int n_test_anchors = 25;
        /// "spread" places test companions inside the model's training window, "sync" at map_index.
        std::string test_placement = "spread";
    } tbw;

    struct Train {
        int epochs = 80;
        int batch_size = 128;
        double lr = 0.01;
        double momentum = 0.9;
        int decay_epoch = 60;
        double decay_factor = 0.1;
        int eval_every = 0;
    } train;

    struct Eval {
        std::string checkpoint;
        std::vector<std::string> ensemble;
        std::string subset_tag;
        std::string aggregation = "logits";  ///< "logits" or "softmax"
        std::string split = "test";          ///< "" evaluates every record
    } eval;

    struct Sweep {
        std::string checkpoint;
        std::vector<std::string> widths;  ///< labels like "sync", "T/30", "T", or numbers (fraction of T)
        int runs = 100;
        std::string split = "test";
        bool plot = true;
    } sweep;

    struct GradCheck {
        double tolerance = 1e-4;
        double linear_tolerance = 1e-6;
        bool inject_fault = false;
        bool include_audio = true;
    } gradcheck;

    void validate() const;

    TrainOptions train_options() const;
    PredictOptions predict_options() const;
    /// Model config for `ds` with the model/tbw sections applied.
    ModelConfig model_config(const Dataset& ds) const;
    std::vector<SweepWidth> sweep_widths() const;
};

nlohmann::json to_json(const RunConfig& c);
/// Overlays `j` on the defaults; throws ConfigError on unknown keys or wrong types.
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);

/// Parses "sync", "T", "T/30", "2T/3" or a plain number into a fraction of T.
SweepWidth parse_width(const std::string& s);

}  // namespace tbn
