#include "tbn/audio.hpp"

#include <cmath>
#include <numbers>

#include "tbn/error.hpp"
#include "tbn/io.hpp"

namespace tbn::audio {

void Waveform::validate() const {
    if (!(sample_rate > 0.0)) throw InvalidArgument("waveform sample_rate must be > 0");
    if (channels < 1) throw InvalidArgument("waveform channels must be >= 1");
    if (samples.empty()) throw InvalidArgument("waveform is empty");
    if (samples.size() % static_cast<std::size_t>(channels) != 0) {
        throw InvalidArgument("waveform sample count is not a multiple of the channel count");
    }
}

Waveform prepare_waveform(const Waveform& w) {
    w.validate();
    if (w.channels == 1 && w.sample_rate == kSampleRate) return w;

    const std::size_t n = w.frames();
    std::vector<double> mono(n);
    for (std::size_t f = 0; f < n; ++f) {
        double s = 0.0;
        for (int c = 0; c < w.channels; ++c) s += w.samples[f * w.channels + c];
        mono[f] = s / w.channels;
    }

    Waveform out;
    out.sample_rate = kSampleRate;
    out.channels = 1;
    if (w.sample_rate == kSampleRate) {
        out.samples.assign(mono.begin(), mono.end());
        return out;
    }
    const double step = w.sample_rate / kSampleRate;
    const auto m = static_cast<std::size_t>(std::max(1.0, std::floor(static_cast<double>(n) / step)));
    out.samples.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
        const double pos = static_cast<double>(i) * step;
        const auto i0 = std::min(static_cast<std::size_t>(pos), n - 1);
        const std::size_t i1 = std::min(i0 + 1, n - 1);
        const double frac = pos - static_cast<double>(i0);
        out.samples[i] = static_cast<float>(mono[i0] + (mono[i1] - mono[i0]) * frac);
    }
    return out;
}

Waveform extract_window(const Waveform& w, double center) {
    w.validate();
    if (w.channels != 1 || w.sample_rate != kSampleRate) {
        throw InvalidArgument("extract_window expects a 24 kHz mono waveform; call prepare_waveform first");
    }
    if (!std::isfinite(center)) throw InvalidArgument("extract_window: non-finite center");
    const long n = static_cast<long>(w.samples.size());
    const long start = std::lround(center * kSampleRate) - kWindowSamples / 2;
    Waveform out;
    out.samples.assign(kWindowSamples, 0.0f);
    for (long k = 0; k < kWindowSamples; ++k) {
        const long src = start + k;
        if (src >= 0 && src < n) out.samples[static_cast<std::size_t>(k)] = w.samples[static_cast<std::size_t>(src)];
    }
    return out;
}

void fft(std::vector<std::complex<double>>& a) {
    const std::size_t n = a.size();
    if (n == 0 || (n & (n - 1)) != 0) throw InvalidArgument("fft size must be a power of two");
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = -2.0 * std::numbers::pi / static_cast<double>(len);
        for (std::size_t k = 0; k < len / 2; ++k) {
            const std::complex<double> wk(std::cos(ang * static_cast<double>(k)), std::sin(ang * static_cast<double>(k)));
            for (std::size_t i = 0; i < n; i += len) {
                const auto u = a[i + k];
                const auto v = a[i + k + len / 2] * wk;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
            }
        }
    }
}

namespace {

const std::vector<double>& hann_window() {
    static const std::vector<double> w = [] {
        std::vector<double> v(kFrameLength);
        for (int i = 0; i < kFrameLength; ++i) {
            v[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / kFrameLength);
        }
        return v;
    }();
    return w;
}

long reflect(long i, long n) {
    if (i < 0) return -i;
    if (i >= n) return 2 * (n - 1) - i;
    return i;
}

}  // namespace

Spectrogram log_spectrogram(const Waveform& window) {
    if (window.channels != 1 || window.sample_rate != kSampleRate ||
        window.samples.size() != static_cast<std::size_t>(kWindowSamples)) {
        throw InvalidArgument("log_spectrogram expects exactly " + std::to_string(kWindowSamples) +
                              " mono samples at 24 kHz, got " + std::to_string(window.samples.size()));
    }
    const auto& hann = hann_window();
    Spectrogram spec;
    spec.values = Tensor<float>({kBins, kFrames});
    std::vector<std::complex<double>> buf(kFftSize);
    for (int t = 0; t < kFrames; ++t) {
        std::fill(buf.begin(), buf.end(), std::complex<double>{});
        const long first = static_cast<long>(t) * kHop - kFrameLength / 2;
        for (int k = 0; k < kFrameLength; ++k) {
            const long src = reflect(first + k, kWindowSamples);
            buf[static_cast<std::size_t>(k)] = window.samples[static_cast<std::size_t>(src)] * hann[static_cast<std::size_t>(k)];
        }
        fft(buf);
        for (int f = 0; f < kBins; ++f) {
            spec.values.at(static_cast<std::size_t>(f), static_cast<std::size_t>(t)) =
                static_cast<float>(std::log(std::abs(buf[static_cast<std::size_t>(f)]) + kLogFloor));
        }
    }
    return spec;
}

void write_waveform(const std::string& path, const Waveform& w) {
    w.validate();
    write_f32_file(path, w.samples);
    write_json_file(sidecar_path(path),
                    {{"sample_rate", w.sample_rate}, {"channels", w.channels}, {"length", w.frames()}});
}

Waveform read_waveform(const std::string& path) {
    const auto meta = read_json_file(sidecar_path(path));
    Waveform w;
    try {
        w.sample_rate = meta.at("sample_rate").get<double>();
        w.channels = meta.at("channels").get<int>();
        const auto length = meta.at("length").get<std::size_t>();
        w.samples = read_f32_file(path);
        if (w.samples.size() != length * static_cast<std::size_t>(w.channels)) {
            throw IoError(path, "sidecar length " + std::to_string(length) + " does not match " +
                                    std::to_string(w.samples.size()) + " samples");
        }
    } catch (const nlohmann::json::exception& e) {
        throw IoError(sidecar_path(path), std::string("bad waveform sidecar: ") + e.what());
    }
    w.validate();
    return w;
}

}  // namespace tbn::audio
