#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "tbn/audio.hpp"
#include "tbn/dataset.hpp"
#include "tbn/sampler.hpp"

namespace tbn {

/// How class evidence is written into the streams.
enum class EvidenceCoding {
    /// One event per sample; every informative modality shows its class template.
    template_class,
    /// The anchor modality shows a class-group template and a random polarity key; companion
    /// modalities show key * class-bit. The class is only recoverable by combining the anchor
    /// with a companion observed inside the same window. Evidence recurs as a pulse train.
    keyed,
};

struct SynthSpec {
    int n_classes = 8;
    int samples_per_class = 200;
    double duration = 2.0;  ///< T, seconds
    /// Anchor first. All vector-frame; rates deliberately unequal.
    std::vector<ModalitySpec> modalities = {{"rgb", 60.0, ModalityKind::vector_frame},
                                            {"flow", 30.0, ModalityKind::vector_frame},
                                            {"audio", 75.0, ModalityKind::vector_frame}};
    std::size_t frame_dim = 16;
    EvidenceCoding coding = EvidenceCoding::keyed;
    double offset_frac = 0.15;     ///< delta: companion evidence sits at s_i * delta * T from the anchor's
    double evidence_width = 0.27;  ///< seconds per event / pulse
    /// Keyed coding only: fraction of T over which the pulse train runs.
    double evidence_span = 1.0;
    double noise_sigma = 0.3;
    double amplitude = 2.0;
    /// [class][modality]; empty means every modality is informative for every class.
    std::vector<std::vector<bool>> informative;
    double distractor_rate = 0.0;  ///< Poisson events per second, injected in the last modality
    double held_out_fraction = 0.2;
    /// Independent noun labels (multi-task stress); otherwise noun = verb.
    bool multitask_nouns = false;
    int n_nouns = 0;  ///< 0 => n_classes
    /// Adds an "audio_wave" 24 kHz modality carrying the class tone signature.
    bool audio_waveform = false;

    int noun_classes() const { return n_nouns > 0 ? n_nouns : n_classes; }
    bool is_informative(int cls, std::size_t modality) const;
    /// Per-modality sign s_i of the evidence offset: 0 for the anchor, then +1, -1, +2, -2, ...
    static int offset_sign(std::size_t modality);
    void validate() const;

    /// delta = 0.15 keyed benchmark.
    static SynthSpec standard();
    /// delta = 0.05 keyed benchmark with a half-length evidence span, used for width sweeps.
    static SynthSpec sweep();
};

nlohmann::json to_json(const SynthSpec& spec);
/// Fields absent from `j` keep the defaults of `base`; unknown keys throw ConfigError.
SynthSpec synth_spec_from_json(const nlohmann::json& j, SynthSpec base = {});

/// Unit-norm, mutually orthogonal evidence templates per modality: [modality][template][frame_dim].
/// Template coding uses one per class; keyed coding uses one per class group followed by the
/// polarity template.
std::vector<std::vector<std::vector<double>>> synth_templates(const SynthSpec& spec, std::uint64_t seed);

/// Deterministic in (spec, seed); each sample draws from its own sub-stream.
Dataset generate_dataset(const SynthSpec& spec, std::uint64_t seed);

/// Class tone chord at 24 kHz: a sine at 1000 * (1 + 0.25 * (c mod 28)) Hz plus a half-amplitude
/// partial at 1.5x that frequency.
audio::Waveform render_audio_signature(int class_id, double duration);
double signature_frequency(int class_id);

}  // namespace tbn
