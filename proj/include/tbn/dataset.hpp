#pragma once

#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "tbn/audio.hpp"
#include "tbn/sampler.hpp"
#include "tbn/tensor.hpp"

namespace tbn {

/// Raw samples of one modality for one segment. Vector-frame modalities fill `frames`
/// ([length, frame_dim]); audio-waveform modalities fill `wave`.
struct StreamData {
    Tensor<float> frames;
    audio::Waveform wave;
};

struct Record {
    ActionSegment segment;
    std::string split = "train";
    std::vector<std::string> stream_paths;  ///< relative to the dataset directory, one per modality
    std::vector<StreamData> streams;        ///< one per modality, same order as Dataset::modalities
};

struct Dataset {
    std::vector<ModalitySpec> modalities;
    std::vector<std::size_t> frame_dims;  ///< per modality; 0 for audio-waveform
    int n_verbs = 0;
    int n_nouns = 0;
    std::vector<Record> records;

    std::size_t modality_index(const std::string& id) const;
    /// Indices of records in `split` ("" selects all).
    std::vector<std::size_t> split_indices(const std::string& split) const;
    std::set<std::string> tag_vocabulary() const;
    /// Per-verb-class record counts within `split`.
    std::vector<std::size_t> verb_counts(const std::string& split) const;
    void validate() const;
};

/// Manifest line for one record: {video_id, start, end, verb_class, noun_class, tags, streams, split}.
nlohmann::json record_to_json(const Record& r, const std::vector<ModalitySpec>& modalities);

/// Writes `dir`/manifest.jsonl, `dir`/dataset.json and one float32 file + sidecar per stream.
void write_dataset(const std::string& dir, const Dataset& ds);

/// Loads a manifest (path to manifest.jsonl or its directory) together with all stream files.
/// Modality rates come from the stream sidecars; class counts from dataset.json when present.
Dataset load_dataset(const std::string& manifest_path);

}  // namespace tbn
