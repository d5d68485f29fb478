#include "tbn/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tbn/error.hpp"

namespace tbn {

namespace {

constexpr double kIndexTolerance = 1e-9;

/// Per-modality Weyl increments (golden ratio, then fractional parts of sqrt(2), sqrt(3), ...).
constexpr double kWeyl[] = {0.6180339887498949, 0.41421356237309515, 0.7320508075688772,
                            0.2360679774997898, 0.6457513110645907,  0.3166247903554};

void require_rate(double r, const char* what) {
    if (!(r > 0.0) || !std::isfinite(r)) {
        throw InvalidArgument(std::string(what) + " must be a positive rate, got " + std::to_string(r));
    }
}

long uniform_in(long lo, long hi, Rng& rng) {
    if (lo == hi) return lo;
    return std::uniform_int_distribution<long>(lo, hi)(rng);
}

/// Draws from `window` intersected with the stream for vector-frame modalities.
/// Returns {raw, clamped}. A single-candidate window consumes no randomness.
std::pair<long, long> draw_companion(const IndexRange& window, const ModalitySpec& spec, long n_frames,
                                     Rng* rng, double u) {
    if (spec.kind == ModalityKind::audio_waveform) {
        const long k = rng ? uniform_in(window.lo, window.hi, *rng)
                           : window.lo + static_cast<long>(u * static_cast<double>(window.hi - window.lo + 1));
        return {k, k};
    }
    const long lo = std::max(window.lo, 0L);
    const long hi = std::min(window.hi, n_frames - 1);
    long raw;
    if (lo > hi) {
        raw = window.hi < 0 ? window.hi : window.lo;
    } else if (rng) {
        raw = uniform_in(lo, hi, *rng);
    } else {
        raw = lo + std::min(static_cast<long>(u * static_cast<double>(hi - lo + 1)), hi - lo);
    }
    return {raw, std::clamp(raw, 0L, n_frames - 1)};
}

void require_specs(const std::vector<ModalitySpec>& specs) {
    if (specs.empty()) throw InvalidArgument("at least one modality is required");
    for (const auto& s : specs) s.validate();
}

std::vector<long> frame_counts(const ActionSegment& segment, const std::vector<ModalitySpec>& specs) {
    std::vector<long> n;
    n.reserve(specs.size());
    for (const auto& s : specs) n.push_back(frame_count(segment.duration(), s.rate));
    return n;
}

}  // namespace

void ModalitySpec::validate() const {
    if (id.empty()) throw InvalidArgument("modality id must not be empty");
    require_rate(rate, ("modality '" + id + "' rate").c_str());
}

void ActionSegment::validate() const {
    if (!(end > start)) {
        throw InvalidArgument("segment '" + video_id + "' must have end > start (" + std::to_string(start) +
                              ", " + std::to_string(end) + ")");
    }
}

void TBWConfig::validate() const {
    if (segments < 1) throw InvalidArgument("segments (K) must be >= 1");
    if (!(b_rel >= 0.0)) throw InvalidArgument("b_rel must be >= 0");
    if (n_test_anchors < 1) throw InvalidArgument("n_test_anchors must be >= 1");
}

long ceil_tolerant(double x) {
    return static_cast<long>(std::ceil(x - kIndexTolerance * std::max(1.0, std::abs(x))));
}

long floor_tolerant(double x) {
    return static_cast<long>(std::floor(x + kIndexTolerance * std::max(1.0, std::abs(x))));
}

long frame_count(double duration, double rate) {
    require_rate(rate, "rate");
    return floor_tolerant(duration * rate);
}

long map_index(long j, double r_from, double r_to) {
    require_rate(r_from, "r_from");
    require_rate(r_to, "r_to");
    if (j < 0) throw InvalidArgument("map_index: negative index " + std::to_string(j));
    return ceil_tolerant(static_cast<double>(j) * r_to / r_from);
}

std::vector<IndexRange> partition_frames(long n_frames, int segments) {
    if (segments < 1) throw InvalidArgument("segments (K) must be >= 1");
    if (n_frames < segments) {
        throw TooShortSegment("segment has " + std::to_string(n_frames) + " frames, fewer than K=" +
                              std::to_string(segments));
    }
    const long width = n_frames / segments;
    std::vector<IndexRange> ranges;
    ranges.reserve(static_cast<std::size_t>(segments));
    for (int k = 0; k < segments; ++k) {
        const long lo = k * width;
        ranges.push_back({lo, k + 1 == segments ? n_frames : lo + width});
    }
    return ranges;
}

std::vector<IndexRange> partition_segments(const ActionSegment& segment, int segments, double rate) {
    segment.validate();
    return partition_frames(frame_count(segment.duration(), rate), segments);
}

IndexRange tbw_bounds(long j, double r_anchor, double r_target, double b_seconds) {
    require_rate(r_anchor, "r_anchor");
    require_rate(r_target, "r_target");
    if (!(b_seconds >= 0.0)) throw InvalidArgument("tbw_bounds: b must be >= 0");
    const double centre = static_cast<double>(j) * r_target / r_anchor;
    const double half = b_seconds * r_target;
    return {ceil_tolerant(centre - half), ceil_tolerant(centre + half)};
}

std::vector<SampleTuple> sample_synchronous_tuples(const ActionSegment& segment,
                                                   const std::vector<ModalitySpec>& specs, int segments,
                                                   Rng& rng) {
    require_specs(specs);
    segment.validate();
    const auto n = frame_counts(segment, specs);
    std::vector<SampleTuple> out;
    for (const auto& range : partition_frames(n[0], segments)) {
        SampleTuple t;
        const long j = uniform_in(range.lo, range.hi - 1, rng);
        t.raw.push_back(j);
        t.index.push_back(j);
        for (std::size_t m = 1; m < specs.size(); ++m) {
            const long k = map_index(j, specs[0].rate, specs[m].rate);
            t.raw.push_back(k);
            t.index.push_back(specs[m].kind == ModalityKind::audio_waveform ? k : std::clamp(k, 0L, n[m] - 1));
        }
        out.push_back(std::move(t));
    }
    return out;
}

std::vector<SampleTuple> sample_training_tuples(const ActionSegment& segment,
                                                const std::vector<ModalitySpec>& specs,
                                                const TBWConfig& config, Rng& rng) {
    config.validate();
    if (config.mode != SamplingMode::train_random) {
        throw InvalidArgument("sample_training_tuples requires train-random mode");
    }
    require_specs(specs);
    segment.validate();
    const auto n = frame_counts(segment, specs);
    const double b = config.half_width_seconds(segment.duration());
    std::vector<SampleTuple> out;
    for (const auto& range : partition_frames(n[0], config.segments)) {
        SampleTuple t;
        const long j = uniform_in(range.lo, range.hi - 1, rng);
        t.raw.push_back(j);
        t.index.push_back(j);
        for (std::size_t m = 1; m < specs.size(); ++m) {
            const auto window = tbw_bounds(j, specs[0].rate, specs[m].rate, b);
            const auto [raw, idx] = draw_companion(window, specs[m], n[m], &rng, 0.0);
            t.raw.push_back(raw);
            t.index.push_back(idx);
        }
        out.push_back(std::move(t));
    }
    return out;
}

std::vector<SampleTuple> sample_test_tuples(const ActionSegment& segment,
                                            const std::vector<ModalitySpec>& specs,
                                            const TBWConfig& config) {
    config.validate();
    if (config.mode != SamplingMode::test_deterministic) {
        throw InvalidArgument("sample_test_tuples requires test-deterministic mode");
    }
    require_specs(specs);
    segment.validate();
    const auto n = frame_counts(segment, specs);
    const long count = config.n_test_anchors;
    if (n[0] < count) {
        throw TooShortSegment("segment has " + std::to_string(n[0]) + " anchor frames, fewer than " +
                              std::to_string(count) + " test anchors");
    }
    const double b = config.test_placement == TestPlacement::spread ? config.half_width_seconds(segment.duration())
                                                                    : 0.0;
    std::vector<SampleTuple> out;
    out.reserve(static_cast<std::size_t>(count));
    for (long i = 0; i < count; ++i) {
        SampleTuple t;
        const long j = floor_tolerant((static_cast<double>(i) + 0.5) * static_cast<double>(n[0]) /
                                      static_cast<double>(count));
        t.raw.push_back(j);
        t.index.push_back(j);
        for (std::size_t m = 1; m < specs.size(); ++m) {
            const auto window = tbw_bounds(j, specs[0].rate, specs[m].rate, b);
            const double step = kWeyl[(m - 1) % std::size(kWeyl)];
            double u = static_cast<double>(i + 1) * step;
            u -= std::floor(u);
            const auto [raw, idx] = draw_companion(window, specs[m], n[m], nullptr, u);
            t.raw.push_back(raw);
            t.index.push_back(idx);
        }
        out.push_back(std::move(t));
    }
    return out;
}

SampleTuple sample_single_tbw(const ActionSegment& segment, const std::vector<ModalitySpec>& specs,
                              double b_seconds, Rng& rng) {
    require_specs(specs);
    segment.validate();
    if (!(b_seconds >= 0.0)) throw InvalidArgument("sample_single_tbw: b must be >= 0");
    const auto n = frame_counts(segment, specs);
    if (n[0] < 1) throw TooShortSegment("segment has no anchor frames");
    SampleTuple t;
    const long j = uniform_in(0, n[0] - 1, rng);
    t.raw.push_back(j);
    t.index.push_back(j);
    for (std::size_t m = 1; m < specs.size(); ++m) {
        const auto window = tbw_bounds(j, specs[0].rate, specs[m].rate, b_seconds);
        const auto [raw, idx] = draw_companion(window, specs[m], n[m], &rng, 0.0);
        t.raw.push_back(raw);
        t.index.push_back(idx);
    }
    return t;
}

}  // namespace tbn
