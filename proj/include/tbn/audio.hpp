#pragma once

#include <complex>
#include <string>
#include <vector>

#include "tbn/tensor.hpp"

namespace tbn::audio {

inline constexpr int kSampleRate = 24000;
inline constexpr int kWindowSamples = 30720;  // 1.28 s
inline constexpr int kFrameLength = 240;      // 10 ms
inline constexpr int kHop = 120;              // 5 ms
inline constexpr int kFftSize = 512;
inline constexpr int kBins = 256;
inline constexpr int kFrames = 256;
inline constexpr double kLogFloor = 1e-5;

/// Interleaved samples: frame f, channel c lives at samples[f * channels + c].
struct Waveform {
    std::vector<float> samples;
    double sample_rate = kSampleRate;
    int channels = 1;

    std::size_t frames() const { return channels > 0 ? samples.size() / static_cast<std::size_t>(channels) : 0; }
    double duration() const { return static_cast<double>(frames()) / sample_rate; }
    void validate() const;
};

struct Spectrogram {
    Tensor<float> values;  ///< [kBins, kFrames], frequency-major
    double center_time = 0.0;
};

/// Mono (channel mean) at 24 kHz via linear interpolation. 24 kHz mono input is returned as is.
Waveform prepare_waveform(const Waveform& w);

/// 30720 samples centred on round(center * 24000), zero-padded outside the recording.
/// `w` must already be 24 kHz mono.
Waveform extract_window(const Waveform& w, double center);

/// Log-magnitude STFT: 256 centred frames (reflect padding), 240-sample periodic Hann
/// window zero-padded to 512 points, bins 0..255, ln(|X| + 1e-5).
Spectrogram log_spectrogram(const Waveform& window);

/// In-place iterative radix-2 FFT; size must be a power of two.
void fft(std::vector<std::complex<double>>& data);

/// Raw float32 samples plus "<path>.json" sidecar {sample_rate, channels, length}.
void write_waveform(const std::string& path, const Waveform& w);
Waveform read_waveform(const std::string& path);

}  // namespace tbn::audio
