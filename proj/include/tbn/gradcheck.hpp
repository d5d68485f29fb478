#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "tbn/tensor.hpp"

namespace tbn {

struct GradCheckResult {
    std::string name;
    double max_rel_error = 0.0;
    std::size_t coords_checked = 0;
    double tolerance = 0.0;
    bool passed() const { return max_rel_error < tolerance; }
};

struct GradCheckOptions {
    double step = 1e-5;
    double tolerance = 1e-4;
    /// Coordinates sampled per parameter; parameters at most this large are checked exhaustively.
    std::size_t max_coords = 64;
    /// Gradients below this magnitude are compared in absolute terms.
    double denom_floor = 1e-6;
    std::uint64_t seed = 0;
};

/// Loss as a function of the current parameter values. It must be deterministic and,
/// when `with_backward` is set, accumulate the analytic gradient into each Parameter::grad.
using LossFn = std::function<double(bool with_backward)>;

/// Compares analytic gradients with central differences (f(w+h) - f(w-h)) / 2h on a
/// random subset of coordinates of every parameter. Failures are reported, never thrown.
///
/// relative error = |analytic - numeric| / max(|analytic|, |numeric|, denom_floor)
GradCheckResult grad_check(const std::string& name, const LossFn& loss,
                           const std::vector<Parameter<double>*>& params,
                           const GradCheckOptions& options = {});

}  // namespace tbn

namespace tbn {

struct GradCheckSuiteOptions {
    std::uint64_t seed = 0;
    double tolerance = 1e-4;
    double linear_tolerance = 1e-6;
    /// Replaces the relu backward with a deliberately wrong one (mutation check).
    bool inject_fault = false;
    /// Includes a forward_loss check with an audio-waveform modality (spectrogram input).
    bool include_audio = true;
};

/// Checks every tape op, each fusion strategy and the full forward_loss in 64-bit mode.
std::vector<GradCheckResult> gradcheck_suite(const GradCheckSuiteOptions& options = {});

}  // namespace tbn
