#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "tbn/rng.hpp"

namespace tbn {

enum class ModalityKind { vector_frame, audio_waveform };

struct ModalitySpec {
    std::string id;
    double rate = 0.0;  ///< samples per second
    ModalityKind kind = ModalityKind::vector_frame;

    void validate() const;
};

/// A labeled interval [start, end] (seconds) of an untrimmed recording.
struct ActionSegment {
    std::string video_id;
    double start = 0.0;
    double end = 0.0;
    int verb_class = 0;
    int noun_class = 0;
    std::set<std::string> tags;

    double duration() const { return end - start; }
    void validate() const;
};

enum class SamplingMode { train_random, test_deterministic, test_single_tbw };

/// Where test-deterministic mode puts companion samples.
enum class TestPlacement {
    synchronous,  ///< rate-mapped index of the anchor (zero window)
    spread,       ///< deterministic low-discrepancy offsets inside the window
};

struct TBWConfig {
    int segments = 3;          ///< K
    double b_rel = 1.0;        ///< window half-width as a fraction of the segment duration
    SamplingMode mode = SamplingMode::train_random;
    int n_test_anchors = 25;
    TestPlacement test_placement = TestPlacement::synchronous;

    double half_width_seconds(double duration) const { return b_rel * duration; }
    void validate() const;
};

/// One TBW: per-modality indices, anchor first. For vector-frame modalities `index` is
/// the frame clamped to the stream and `raw` the draw before clamping; for audio both
/// hold a sample index at the modality rate (centre time = index / rate), never clamped.
struct SampleTuple {
    std::size_t anchor_modality = 0;
    std::vector<long> raw;
    std::vector<long> index;
};

struct IndexRange {
    long lo = 0;  ///< inclusive
    long hi = 0;  ///< inclusive for tbw_bounds, exclusive for partitions
    bool operator==(const IndexRange&) const = default;
};

/// ceil(x) that ignores representation error of a few ulps above an integer.
long ceil_tolerant(double x);
/// floor(x) that ignores representation error of a few ulps below an integer.
long floor_tolerant(double x);

/// Number of whole samples of a stream at `rate` covering `duration` seconds.
long frame_count(double duration, double rate);

/// Index of source sample j in a stream at r_to: ceil(j * r_to / r_from).
long map_index(long j, double r_from, double r_to);

/// K contiguous half-open ranges covering [0, n_frames); the last absorbs the remainder.
std::vector<IndexRange> partition_frames(long n_frames, int segments);
std::vector<IndexRange> partition_segments(const ActionSegment& segment, int segments, double rate);

/// Inclusive target-index window [ceil(j r_t / r_a - b r_t), ceil(j r_t / r_a + b r_t)], b in seconds.
IndexRange tbw_bounds(long j, double r_anchor, double r_target, double b_seconds);

/// Synchronous sampler: one uniform anchor per segment range, companions at map_index.
std::vector<SampleTuple> sample_synchronous_tuples(const ActionSegment& segment,
                                                   const std::vector<ModalitySpec>& specs, int segments,
                                                   Rng& rng);

/// K tuples: one uniform anchor per range, companions uniform inside the TBW.
std::vector<SampleTuple> sample_training_tuples(const ActionSegment& segment,
                                                const std::vector<ModalitySpec>& specs,
                                                const TBWConfig& config, Rng& rng);

/// n_test_anchors tuples at the centres of evenly spaced sub-intervals; rng-free.
std::vector<SampleTuple> sample_test_tuples(const ActionSegment& segment,
                                            const std::vector<ModalitySpec>& specs,
                                            const TBWConfig& config);

/// One tuple: anchor uniform over the whole segment, companions uniform inside +-b seconds.
SampleTuple sample_single_tbw(const ActionSegment& segment, const std::vector<ModalitySpec>& specs,
                              double b_seconds, Rng& rng);

}  // namespace tbn
