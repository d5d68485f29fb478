#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <numbers>
#include <random>

#include "tbn/audio.hpp"
#include "tbn/error.hpp"

using namespace tbn;
using namespace tbn::audio;

namespace {

Waveform mono(std::vector<float> s, double rate = kSampleRate) {
    Waveform w;
    w.samples = std::move(s);
    w.sample_rate = rate;
    return w;
}

Waveform sine(double freq, std::size_t n, double amp = 1.0) {
    std::vector<float> s(n);
    for (std::size_t i = 0; i < n; ++i) {
        s[i] = static_cast<float>(amp * std::sin(2.0 * std::numbers::pi * freq * static_cast<double>(i) / kSampleRate));
    }
    return mono(std::move(s));
}

/// Direct O(n^2) long-double DFT magnitude of one analysis frame, built from first principles.
std::vector<long double> naive_frame_magnitudes(const std::vector<float>& x, long centre) {
    const long n = static_cast<long>(x.size());
    std::vector<long double> frame(kFftSize, 0.0L);
    for (long k = 0; k < kFrameLength; ++k) {
        long src = centre - kFrameLength / 2 + k;
        if (src < 0) src = -src;
        if (src >= n) src = 2 * (n - 1) - src;
        const long double hann = 0.5L - 0.5L * std::cos(2.0L * std::numbers::pi_v<long double> * k / kFrameLength);
        frame[static_cast<std::size_t>(k)] = x[static_cast<std::size_t>(src)] * hann;
    }
    std::vector<long double> mag(kBins);
    for (int f = 0; f < kBins; ++f) {
        long double re = 0, im = 0;
        for (int k = 0; k < kFftSize; ++k) {
            const long double a = -2.0L * std::numbers::pi_v<long double> * f * k / kFftSize;
            re += frame[static_cast<std::size_t>(k)] * std::cos(a);
            im += frame[static_cast<std::size_t>(k)] * std::sin(a);
        }
        mag[static_cast<std::size_t>(f)] = std::sqrt(re * re + im * im);
    }
    return mag;
}

}  // namespace

TEST(PrepareWaveform, MonoAt24kIsBitIdentical) {
    std::mt19937 g(1);
    std::normal_distribution<float> d;
    std::vector<float> s(5000);
    for (auto& v : s) v = d(g);
    const auto out = prepare_waveform(mono(s));
    EXPECT_EQ(out.sample_rate, kSampleRate);
    ASSERT_EQ(out.samples.size(), s.size());
    EXPECT_EQ(std::memcmp(out.samples.data(), s.data(), s.size() * sizeof(float)), 0);
}

TEST(PrepareWaveform, HalvesLengthFrom48k) {
    const std::size_t n = 12345;
    const auto out = prepare_waveform(mono(std::vector<float>(2 * n, 0.25f), 48000));
    EXPECT_NEAR(static_cast<double>(out.samples.size()), static_cast<double>(n), 1.0);
    EXPECT_EQ(out.sample_rate, kSampleRate);
    for (float v : out.samples) EXPECT_FLOAT_EQ(v, 0.25f);
}

TEST(PrepareWaveform, StereoWithEqualChannels) {
    Waveform w;
    w.channels = 2;
    std::vector<float> left;
    for (int i = 0; i < 1000; ++i) {
        const float v = std::sin(0.01f * static_cast<float>(i));
        left.push_back(v);
        w.samples.push_back(v);
        w.samples.push_back(v);
    }
    const auto out = prepare_waveform(w);
    EXPECT_EQ(out.channels, 1);
    EXPECT_EQ(out.samples, left);
}

TEST(PrepareWaveform, RejectsEmpty) { EXPECT_THROW(prepare_waveform(mono({})), InvalidArgument); }

TEST(ExtractWindow, InteriorHasNoPadding) {
    std::vector<float> s(100000);
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = static_cast<float>(i + 1);
    const auto w = extract_window(mono(s), 2.0);
    ASSERT_EQ(w.samples.size(), static_cast<std::size_t>(kWindowSamples));
    EXPECT_EQ(w.samples.front(), static_cast<float>(48000 - 15360 + 1));
    for (float v : w.samples) EXPECT_NE(v, 0.0f);
}

TEST(ExtractWindow, PaddedPrefixAtStart) {
    const auto w = extract_window(mono(std::vector<float>(100000, 1.0f)), 0.0);
    for (int i = 0; i < 15360; ++i) ASSERT_EQ(w.samples[i], 0.0f) << i;
    for (int i = 15360; i < kWindowSamples; ++i) ASSERT_EQ(w.samples[i], 1.0f) << i;
}

TEST(ExtractWindow, PaddedSuffixAtEnd) {
    const std::size_t n = 96000;
    const auto w = extract_window(mono(std::vector<float>(n, 1.0f)), static_cast<double>(n) / kSampleRate);
    for (int i = 0; i < 15360; ++i) ASSERT_EQ(w.samples[i], 1.0f) << i;
    for (int i = 15360; i < kWindowSamples; ++i) ASSERT_EQ(w.samples[i], 0.0f) << i;
}

TEST(LogSpectrogram, ShapeAndFiniteness) {
    std::mt19937 g(2);
    std::uniform_real_distribution<float> d(-1, 1);
    std::vector<float> s(kWindowSamples);
    for (auto& v : s) v = d(g);
    const auto spec = log_spectrogram(mono(s));
    EXPECT_EQ(spec.values.shape(), (Shape{256, 256}));
    for (float v : spec.values.values()) EXPECT_TRUE(std::isfinite(v));
}

TEST(LogSpectrogram, SilenceIsLogFloor) {
    const auto spec = log_spectrogram(mono(std::vector<float>(kWindowSamples, 0.0f)));
    const float floor = static_cast<float>(std::log(1e-5));
    for (float v : spec.values.values()) ASSERT_EQ(v, floor);
}

TEST(LogSpectrogram, RejectsWrongLength) {
    EXPECT_THROW(log_spectrogram(mono(std::vector<float>(kWindowSamples - 1))), InvalidArgument);
}

TEST(LogSpectrogram, SinePeaksAtBin21) {
    const auto w = sine(1000.0, kWindowSamples);
    const auto spec = log_spectrogram(w);
    for (std::size_t t = 0; t < kFrames; ++t) {
        std::size_t best = 0;
        for (std::size_t f = 1; f < kBins; ++f) {
            if (spec.values.at(f, t) > spec.values.at(best, t)) best = f;
        }
        const auto mag = naive_frame_magnitudes(w.samples, static_cast<long>(t) * kHop);
        const auto oracle = static_cast<std::size_t>(std::max_element(mag.begin(), mag.end()) - mag.begin());
        ASSERT_EQ(best, oracle) << "frame " << t;
        // Frame 0 is the only one reaching into the reflect padding; the mirrored sine flips phase
        // at its centre and splits the main lobe.
        if (t > 0) ASSERT_EQ(best, 21u) << "frame " << t;
    }
}

TEST(LogSpectrogram, CosinePeaksAtBin21InEveryFrame) {
    std::vector<float> s(kWindowSamples);
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = static_cast<float>(std::cos(2.0 * std::numbers::pi * 1000.0 * static_cast<double>(i) / kSampleRate));
    const auto spec = log_spectrogram(mono(s));
    for (std::size_t t = 0; t < kFrames; ++t) {
        std::size_t best = 0;
        for (std::size_t f = 1; f < kBins; ++f) {
            if (spec.values.at(f, t) > spec.values.at(best, t)) best = f;
        }
        ASSERT_EQ(best, 21u) << "frame " << t;
    }
}

TEST(LogSpectrogram, MatchesNaiveDftOracle) {
    std::mt19937 g(3);
    std::uniform_real_distribution<float> d(-1, 1);
    std::vector<float> s(kWindowSamples);
    for (auto& v : s) v = d(g);
    const auto spec = log_spectrogram(mono(s));
    for (long t : {0L, 1L, 100L, 254L, 255L}) {
        const auto mag = naive_frame_magnitudes(s, t * kHop);
        for (std::size_t f = 0; f < kBins; ++f) {
            const double expect = std::log(static_cast<double>(mag[f]) + 1e-5);
            ASSERT_NEAR(spec.values.at(f, static_cast<std::size_t>(t)), expect, 1e-4) << t << ' ' << f;
        }
    }
}

TEST(LogSpectrogram, ScalingUpNeverDecreasesEntries) {
    std::mt19937 g(4);
    std::uniform_real_distribution<float> d(-1, 1);
    std::vector<float> s(kWindowSamples), s2(kWindowSamples);
    for (std::size_t i = 0; i < s.size(); ++i) {
        s[i] = d(g);
        s2[i] = 2.0f * s[i];
    }
    const auto a = log_spectrogram(mono(s)).values;
    const auto b = log_spectrogram(mono(s2)).values;
    for (std::size_t i = 0; i < a.size(); ++i) ASSERT_GE(b[i], a[i]) << i;
}

TEST(LogSpectrogram, ImpulseIsLocalizedInTime) {
    for (long s : {5000L, 12345L, 20000L, 30000L}) {
        std::vector<float> x(kWindowSamples, 0.0f);
        x[static_cast<std::size_t>(s)] = 1.0f;
        const auto spec = log_spectrogram(mono(x));
        std::size_t best = 0;
        double best_energy = -1.0;
        for (std::size_t t = 0; t < kFrames; ++t) {
            double e = 0.0;
            for (std::size_t f = 0; f < kBins; ++f) e += std::exp(spec.values.at(f, t));
            if (e > best_energy) {
                best_energy = e;
                best = t;
            }
        }
        EXPECT_LE(std::abs(static_cast<double>(best) - static_cast<double>(s) / kHop), 1.0) << s;
    }
}

TEST(LogSpectrogram, Deterministic) {
    const auto w = sine(440.0, kWindowSamples);
    const auto a = log_spectrogram(w).values;
    const auto b = log_spectrogram(w).values;
    EXPECT_EQ(std::memcmp(a.values().data(), b.values().data(), a.size() * sizeof(float)), 0);
}

TEST(Fft, MatchesNaiveDft) {
    std::mt19937 g(5);
    std::normal_distribution<double> d;
    for (std::size_t n : {1u, 2u, 8u, 64u, 512u}) {
        std::vector<std::complex<double>> x(n);
        for (auto& v : x) v = {d(g), d(g)};
        auto y = x;
        fft(y);
        for (std::size_t k = 0; k < n; ++k) {
            std::complex<long double> acc;
            for (std::size_t j = 0; j < n; ++j) {
                const long double a = -2.0L * std::numbers::pi_v<long double> * static_cast<long double>(k * j) / n;
                acc += std::complex<long double>(x[j].real(), x[j].imag()) * std::complex<long double>(std::cos(a), std::sin(a));
            }
            EXPECT_NEAR(y[k].real(), static_cast<double>(acc.real()), 1e-9);
            EXPECT_NEAR(y[k].imag(), static_cast<double>(acc.imag()), 1e-9);
        }
    }
    std::vector<std::complex<double>> bad(6);
    EXPECT_THROW(fft(bad), InvalidArgument);
}

TEST(WaveformFiles, RoundTrip) {
    const auto dir = std::filesystem::temp_directory_path() / "tbn_audio_test";
    std::filesystem::create_directories(dir);
    Waveform w;
    w.sample_rate = 44100;
    w.channels = 2;
    w.samples = {0.5f, -0.5f, 1e-30f, 3.25f, -0.0f, 7.0f};
    const auto path = (dir / "w.f32").string();
    write_waveform(path, w);
    const auto r = read_waveform(path);
    EXPECT_EQ(r.sample_rate, 44100);
    EXPECT_EQ(r.channels, 2);
    EXPECT_EQ(std::memcmp(r.samples.data(), w.samples.data(), w.samples.size() * sizeof(float)), 0);
    std::filesystem::remove_all(dir);
}
