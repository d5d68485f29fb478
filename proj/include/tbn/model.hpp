#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "tbn/checkpoint.hpp"
#include "tbn/sampler.hpp"
#include "tbn/tape.hpp"

namespace tbn {

enum class FusionStrategy { concat, context_gate, gating };

std::string to_string(FusionStrategy f);
FusionStrategy parse_fusion(const std::string& s);

/// Audio-waveform extractors consume a flattened 256x256 spectrogram and 4x4 mean-pool it.
inline constexpr std::size_t kSpectrogramInput = 256 * 256;
inline constexpr std::size_t kAudioPool = 4;

struct ModelConfig {
    std::vector<ModalitySpec> modalities;  ///< anchor first
    std::vector<std::size_t> input_dims;   ///< frame_dim per vector-frame modality (ignored for audio)
    std::size_t hidden_dim = 64;
    std::size_t feature_dim = 64;  ///< D
    std::size_t fused_dim = 512;
    FusionStrategy fusion = FusionStrategy::concat;
    int n_verbs = 8;
    int n_nouns = 8;
    double dropout = 0.5;
    TBWConfig tbw;

    /// Width of the raw per-sample input fed to modality m.
    std::size_t raw_input_dim(std::size_t m) const;
    void validate() const;
};

nlohmann::json to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j);

/// Per-TBW logits after temporal aggregation.
struct ForwardOut {
    Var verb;  ///< [B, V]
    Var noun;  ///< [B, N]
};

/// Temporal Binding Network over M modalities.
///
/// Inputs arrive as one matrix per modality holding B*K rows: row b*K + k is the sample
/// of segment b in TBW k. Extractor, fusion and head parameters are single objects, so
/// every TBW of every segment is computed with the same weights. Per-TBW logits are
/// averaged over the K rows of each segment before the loss.
template <typename T>
class Model {
public:
    struct Extractor {
        Parameter<T> w1, b1, w2, b2;
    };

    explicit Model(ModelConfig config, std::uint64_t seed = 0);

    const ModelConfig& config() const noexcept { return config_; }

    /// All parameters in a fixed order (extractors, fusion, heads).
    std::vector<Parameter<T>*> parameters();
    std::vector<const Parameter<T>*> parameters() const;
    Parameter<T>& parameter(const std::string& name);

    Extractor& extractor(std::size_t m) { return extractors_.at(m); }

    /// [rows, raw_input_dim(m)] -> [rows, D].
    Var extract(Tape<T>& tape, std::size_t m, Var x);
    /// M features [rows, D] -> [rows, fused_dim].
    Var fuse(Tape<T>& tape, std::span<const Var> features);
    /// fused [rows, F] -> verb [rows, V], noun [rows, N].
    ForwardOut heads(Tape<T>& tape, Var fused);

    /// Full forward pass; `group` rows per segment are averaged into one prediction.
    /// `dropout_rng` is required when training with dropout > 0.
    ForwardOut forward(Tape<T>& tape, const std::vector<Tensor<T>>& inputs, std::size_t group, bool training,
                       Rng* dropout_rng);

    /// loss = xent(verb) + xent(noun), a [1] tensor on the tape.
    Var loss(Tape<T>& tape, const ForwardOut& out, std::span<const int> verbs, std::span<const int> nouns);

    Checkpoint to_checkpoint() const;
    static Model from_checkpoint(const Checkpoint& ckpt);

    template <typename U>
    Model<U> cast() const;

private:
    template <typename>
    friend class Model;

    Model() = default;
    void init_parameters(std::uint64_t seed);

    ModelConfig config_;
    std::vector<Extractor> extractors_;
    Parameter<T> fuse_w_, fuse_b_;  // concat, context_gate
    Parameter<T> gate_w_, gate_b_;  // context_gate
    std::vector<Parameter<T>> branch_w_, branch_b_, branch_gate_w_, branch_gate_b_;  // gating
    Parameter<T> verb_w_, verb_b_, noun_w_, noun_b_;
};

extern template class Model<float>;
extern template class Model<double>;

}  // namespace tbn
