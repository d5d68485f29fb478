#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tbn/dataset.hpp"
#include "tbn/metrics.hpp"
#include "tbn/model.hpp"

namespace tbn {

struct TrainOptions {
    int epochs = 80;
    int batch_size = 128;
    double lr = 0.01;
    double momentum = 0.9;
    int decay_epoch = 60;
    double decay_factor = 0.1;
    std::uint64_t seed = 0;
    std::string train_split = "train";
    /// Split evaluated every `eval_every` epochs and after the last one ("" disables).
    std::string eval_split = "test";
    int eval_every = 0;
    TestPlacement eval_placement = TestPlacement::synchronous;

    void validate() const;
};

struct EpochLog {
    int epoch = 0;
    std::string split;
    double loss = 0.0;
    double verb_top1 = 0.0;
    double noun_top1 = 0.0;
    double action_top1 = 0.0;
};

/// How per-TBW predictions are combined at test time.
enum class TestAggregation { logits, softmax };

struct PredictOptions {
    int n_test_anchors = 25;
    TestPlacement placement = TestPlacement::synchronous;
    /// Window half-width (fraction of T) for spread placement; negative => the model's training b_rel.
    double b_rel = -1.0;
    TestAggregation aggregation = TestAggregation::logits;
    std::size_t records_per_chunk = 64;
};

struct Predictions {
    metrics::Scores verb;  ///< class probabilities [n, V]
    metrics::Scores noun;
    metrics::Labels labels;
    double loss = 0.0;  ///< mean xent(verb) + xent(noun) of the aggregated prediction
};

/// Dataset column of each model modality; throws ConfigError when one is missing or differs in rate/width.
std::vector<std::size_t> resolve_modalities(const Dataset& ds, const ModelConfig& cfg);

/// ModelConfig for `ds` restricted to `modality_ids` (all, anchor first, when empty).
ModelConfig model_config_for(const Dataset& ds, const std::vector<std::string>& modality_ids);

/// Stacks one row per (record, tuple) for every model modality: row r*K + k.
template <typename T>
std::vector<Tensor<T>> gather_inputs(const Dataset& ds, const ModelConfig& cfg, std::span<const std::size_t> columns,
                                     std::span<const std::size_t> records,
                                     const std::vector<std::vector<SampleTuple>>& tuples);

/// Samples K training tuples per record, runs the model and returns the loss; optionally backpropagates
/// into the parameters' gradients.
template <typename T>
double forward_loss(Model<T>& model, const Dataset& ds, std::span<const std::size_t> records, Rng& sampler_rng,
                    Rng* dropout_rng, bool with_backward);

struct TrainResult {
    Model<float> model;
    std::vector<EpochLog> log;
};

/// SGD with momentum and step decay. Deterministic in (model config, dataset, options).
TrainResult train(const ModelConfig& config, const Dataset& ds, const TrainOptions& options);

/// Deterministic test-time prediction (rng-free).
Predictions predict(Model<float>& model, const Dataset& ds, std::span<const std::size_t> records,
                    const PredictOptions& options = {});

/// Mean of per-model class probabilities. All models must share class counts.
Predictions ensemble_predict(std::span<Model<float>* const> models, const Dataset& ds,
                             std::span<const std::size_t> records, const PredictOptions& options = {});

metrics::EvalResult evaluate_model(Model<float>& model, const Dataset& ds, std::span<const std::size_t> records,
                                   const PredictOptions& options = {});

struct SweepPoint {
    std::string label;  ///< "sync", "T/30", ...
    double b_rel = 0.0;
    double verb_mean = 0.0, verb_std = 0.0;
    double noun_mean = 0.0, noun_std = 0.0;
    double action_mean = 0.0, action_std = 0.0;
};

struct SweepWidth {
    std::string label;
    double b_rel = 0.0;
};

/// Widths of the published sweep: sync, T/60, T/30, T/25, T/15, T/10, T/5, T/3, plus T.
std::vector<SweepWidth> default_sweep_widths();

/// For each width: `runs` repetitions of one single-TBW prediction per record; mean and
/// population std of top-1 accuracy per task.
std::vector<SweepPoint> sweep_single_tbw(Model<float>& model, const Dataset& ds, std::span<const std::size_t> records,
                                         const std::vector<SweepWidth>& widths, int runs, std::uint64_t seed);

std::string log_csv(const std::vector<EpochLog>& log);
std::string sweep_csv(const std::vector<SweepPoint>& points);

}  // namespace tbn
