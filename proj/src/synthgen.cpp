#include "tbn/synthgen.hpp"

#include <cmath>
#include <iomanip>
#include <numbers>
#include <random>
#include <sstream>

#include "tbn/error.hpp"
#include "tbn/rng.hpp"

namespace tbn {

bool SynthSpec::is_informative(int cls, std::size_t modality) const {
    if (informative.empty()) return true;
    return informative.at(static_cast<std::size_t>(cls)).at(modality);
}

int SynthSpec::offset_sign(std::size_t modality) {
    if (modality == 0) return 0;
    const int k = static_cast<int>((modality + 1) / 2);
    return modality % 2 == 1 ? k : -k;
}

void SynthSpec::validate() const {
    if (n_classes < 2) throw InvalidArgument("n_classes must be >= 2");
    if (samples_per_class < 1) throw InvalidArgument("samples_per_class must be >= 1");
    if (!(duration > 0.0)) throw InvalidArgument("duration must be > 0");
    if (modalities.empty()) throw InvalidArgument("at least one modality is required");
    for (const auto& m : modalities) {
        m.validate();
        if (m.kind != ModalityKind::vector_frame) {
            throw InvalidArgument("synthetic modalities are vector-frame; use audio_waveform for tones");
        }
        if (frame_count(duration, m.rate) < 1) throw InvalidArgument("modality '" + m.id + "' has no frames");
    }
    for (std::size_t a = 0; a < modalities.size(); ++a)
        for (std::size_t b = a + 1; b < modalities.size(); ++b)
            if (modalities[a].id == modalities[b].id) throw InvalidArgument("duplicate modality id '" + modalities[a].id + "'");
    if (!(offset_frac >= 0.0 && offset_frac <= 1.0)) throw InvalidArgument("offset_frac must lie in [0, 1]");
    if (!(noise_sigma >= 0.0)) throw InvalidArgument("noise_sigma must be >= 0");
    if (!(evidence_width > 0.0)) throw InvalidArgument("evidence_width must be > 0");
    if (!(evidence_span > 0.0 && evidence_span <= 1.0)) throw InvalidArgument("evidence_span must lie in (0, 1]");
    if (!(distractor_rate >= 0.0)) throw InvalidArgument("distractor_rate must be >= 0");
    if (!(held_out_fraction >= 0.0 && held_out_fraction < 1.0)) throw InvalidArgument("held_out_fraction must lie in [0, 1)");
    const std::size_t needed = coding == EvidenceCoding::keyed ? static_cast<std::size_t>(n_classes / 2 + 1)
                                                               : static_cast<std::size_t>(n_classes);
    if (frame_dim < needed) {
        throw InvalidArgument("frame_dim " + std::to_string(frame_dim) + " cannot hold " + std::to_string(needed) +
                              " orthogonal templates");
    }
    if (coding == EvidenceCoding::keyed) {
        if (n_classes % 2 != 0) throw InvalidArgument("keyed coding needs an even n_classes");
        if (modalities.size() < 2) throw InvalidArgument("keyed coding needs at least two modalities");
    }
    if (!informative.empty()) {
        if (informative.size() != static_cast<std::size_t>(n_classes)) {
            throw InvalidArgument("informative must have one row per class");
        }
        for (std::size_t c = 0; c < informative.size(); ++c) {
            if (informative[c].size() != modalities.size()) {
                throw InvalidArgument("informative row " + std::to_string(c) + " must have one entry per modality");
            }
            if (std::find(informative[c].begin(), informative[c].end(), true) == informative[c].end()) {
                throw InvalidArgument("class " + std::to_string(c) + " has no informative modality");
            }
        }
    }
    if (n_nouns < 0) throw InvalidArgument("n_nouns must be >= 0");
    const double lo = offset_frac * duration * (static_cast<double>(modalities.size()) / 2.0) + evidence_width / 2.0;
    if (coding == EvidenceCoding::template_class && !(lo < duration - lo + 1e-12)) {
        throw InvalidArgument("offset_frac and evidence_width leave no room for the event inside the segment");
    }
}

SynthSpec SynthSpec::standard() { return SynthSpec{}; }

SynthSpec SynthSpec::sweep() {
    SynthSpec s;
    s.offset_frac = 0.05;
    s.evidence_width = 0.09;
    s.evidence_span = 0.5;
    return s;
}

namespace {

const char* coding_name(EvidenceCoding c) { return c == EvidenceCoding::keyed ? "keyed" : "template"; }

/// Rows of the result are orthonormal vectors in R^dim (Gram-Schmidt on Gaussian draws).
std::vector<std::vector<double>> orthonormal_templates(std::size_t count, std::size_t dim, Rng& rng) {
    std::normal_distribution<double> normal;
    std::vector<std::vector<double>> basis;
    while (basis.size() < count) {
        std::vector<double> v(dim);
        for (auto& x : v) x = normal(rng);
        for (const auto& b : basis) {
            double d = 0.0;
            for (std::size_t i = 0; i < dim; ++i) d += v[i] * b[i];
            for (std::size_t i = 0; i < dim; ++i) v[i] -= d * b[i];
        }
        double norm = 0.0;
        for (double x : v) norm += x * x;
        norm = std::sqrt(norm);
        if (norm < 1e-6) continue;
        for (auto& x : v) x /= norm;
        basis.push_back(std::move(v));
    }
    return basis;
}

/// Evidence vector for `cls` in `modality` with polarity `key` (keyed coding) .
std::vector<double> evidence_vector(const SynthSpec& spec, const std::vector<std::vector<double>>& tmpl,
                                    std::size_t modality, int cls, int key) {
    std::vector<double> v(spec.frame_dim, 0.0);
    if (spec.coding == EvidenceCoding::template_class) {
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = spec.amplitude * tmpl[static_cast<std::size_t>(cls)][i];
        return v;
    }
    const int groups = spec.n_classes / 2;
    const int group = cls % groups;
    const int bit = cls >= groups ? 1 : -1;
    const auto& polarity = tmpl[static_cast<std::size_t>(groups)];
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (modality == 0) {
            v[i] = spec.amplitude * (0.5 * tmpl[static_cast<std::size_t>(group)][i] + key * polarity[i]);
        } else {
            v[i] = spec.amplitude * key * bit * polarity[i];
        }
    }
    return v;
}

void add_at(Tensor<float>& frames, std::size_t row, const std::vector<double>& v) {
    for (std::size_t i = 0; i < v.size(); ++i) frames.at(row, i) = static_cast<float>(frames.at(row, i) + v[i]);
}

std::string video_name(std::size_t index) {
    std::ostringstream s;
    s << 'v' << std::setw(5) << std::setfill('0') << index;
    return s.str();
}

}  // namespace

std::vector<std::vector<std::vector<double>>> synth_templates(const SynthSpec& spec, std::uint64_t seed) {
    spec.validate();
    std::vector<std::vector<std::vector<double>>> templates;
    for (std::size_t m = 0; m < spec.modalities.size(); ++m) {
        Rng trng = substream(seed, "datagen-templates", m);
        templates.push_back(orthonormal_templates(
            spec.coding == EvidenceCoding::keyed ? static_cast<std::size_t>(spec.n_classes / 2 + 1)
                                                 : static_cast<std::size_t>(spec.n_classes),
            spec.frame_dim, trng));
    }
    return templates;
}

Dataset generate_dataset(const SynthSpec& spec, std::uint64_t seed) {
    spec.validate();
    const std::size_t n_mod = spec.modalities.size();

    const auto templates = synth_templates(spec, seed);

    Dataset ds;
    ds.modalities = spec.modalities;
    ds.frame_dims.assign(n_mod, spec.frame_dim);
    if (spec.audio_waveform) {
        ds.modalities.push_back({"audio_wave", audio::kSampleRate, ModalityKind::audio_waveform});
        ds.frame_dims.push_back(0);
    }
    ds.n_verbs = spec.n_classes;
    ds.n_nouns = spec.noun_classes();

    const double T = spec.duration;
    const double dT = spec.offset_frac * T;
    const double w = spec.evidence_width;
    const auto held_out = static_cast<int>(std::lround(spec.held_out_fraction * spec.samples_per_class));
    std::vector<long> lengths;
    for (const auto& m : spec.modalities) lengths.push_back(frame_count(T, m.rate));

    std::size_t index = 0;
    for (int c = 0; c < spec.n_classes; ++c) {
        for (int s = 0; s < spec.samples_per_class; ++s, ++index) {
            Rng rng = substream(seed, "datagen", index);
            std::normal_distribution<double> normal(0.0, 1.0);
            std::uniform_real_distribution<double> unit(0.0, 1.0);

            Record r;
            r.segment.video_id = video_name(index);
            r.segment.start = 0.0;
            r.segment.end = T;
            r.segment.verb_class = c;
            r.segment.noun_class =
                spec.multitask_nouns ? std::uniform_int_distribution<int>(0, spec.noun_classes() - 1)(rng) : c;
            r.split = s >= spec.samples_per_class - held_out ? "test" : "train";

            const int key = unit(rng) < 0.5 ? -1 : 1;
            double t0 = 0.0, span_lo = 0.0, span_hi = T, period = 0.0;
            if (spec.coding == EvidenceCoding::keyed) {
                const double L = spec.evidence_span * T;
                span_lo = unit(rng) * (T - L);
                span_hi = span_lo + L;
                period = 2.0 * dT;
                t0 = span_lo + unit(rng) * period;
            } else {
                const double lo = dT * (static_cast<double>(n_mod) / 2.0) + w / 2.0;
                t0 = lo + unit(rng) * std::max(0.0, T - 2.0 * lo);
            }

            for (std::size_t m = 0; m < n_mod; ++m) {
                const auto n = static_cast<std::size_t>(lengths[m]);
                Tensor<float> frames({n, spec.frame_dim});
                for (auto& x : frames.values()) x = static_cast<float>(spec.noise_sigma * normal(rng));
                if (spec.is_informative(c, m)) {
                    const auto ev = evidence_vector(spec, templates[m], m, c, key);
                    const double centre = t0 + SynthSpec::offset_sign(m) * dT;
                    for (std::size_t i = 0; i < n; ++i) {
                        const double t = (static_cast<double>(i) + 0.5) / spec.modalities[m].rate;
                        bool on;
                        if (spec.coding == EvidenceCoding::keyed) {
                            if (period > 0.0) {
                                const double ph = std::fmod(std::fmod(t - centre, period) + period, period);
                                on = ph < w / 2.0 || ph > period - w / 2.0;
                            } else {
                                on = true;
                            }
                            on = on && t >= span_lo && t < span_hi;
                        } else {
                            on = std::abs(t - centre) <= w / 2.0;
                        }
                        if (on) add_at(frames, i, ev);
                    }
                }
                r.stream_paths.push_back("streams/" + r.segment.video_id + "." + spec.modalities[m].id + ".f32");
                r.streams.push_back({std::move(frames), {}});
            }

            if (spec.distractor_rate > 0.0) {
                const std::size_t m = n_mod - 1;
                const int events = std::poisson_distribution<int>(spec.distractor_rate * T)(rng);
                for (int e = 0; e < events; ++e) {
                    const int other = (c + 1 + std::uniform_int_distribution<int>(0, spec.n_classes - 2)(rng)) % spec.n_classes;
                    const int dkey = unit(rng) < 0.5 ? -1 : 1;
                    const double dt = unit(rng) * T;
                    const auto ev = evidence_vector(spec, templates[m], m, other, dkey);
                    auto& frames = r.streams[m].frames;
                    for (std::size_t i = 0; i < frames.dim(0); ++i) {
                        const double t = (static_cast<double>(i) + 0.5) / spec.modalities[m].rate;
                        if (std::abs(t - dt) <= w / 2.0) add_at(frames, i, ev);
                    }
                }
                if (events > 0) r.segment.tags.insert("distractor");
            }

            if (spec.audio_waveform) {
                auto wave = render_audio_signature(c, T);
                for (auto& x : wave.samples) x = static_cast<float>(x + 0.1 * spec.noise_sigma * normal(rng));
                r.stream_paths.push_back("streams/" + r.segment.video_id + ".audio_wave.f32");
                r.streams.push_back({{}, std::move(wave)});
            }
            ds.records.push_back(std::move(r));
        }
    }
    return ds;
}

double signature_frequency(int class_id) {
    if (class_id < 0) throw InvalidArgument("class id must be >= 0");
    return 1000.0 * (1.0 + 0.25 * (class_id % 28));
}

audio::Waveform render_audio_signature(int class_id, double duration) {
    if (!(duration > 0.0)) throw InvalidArgument("render_audio_signature: duration must be > 0");
    const double f = signature_frequency(class_id);
    const auto n = static_cast<std::size_t>(std::max(1L, floor_tolerant(duration * audio::kSampleRate)));
    audio::Waveform w;
    w.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / audio::kSampleRate;
        w.samples[i] = static_cast<float>(0.5 * std::sin(2.0 * std::numbers::pi * f * t) +
                                          0.25 * std::sin(2.0 * std::numbers::pi * 1.5 * f * t));
    }
    return w;
}

nlohmann::json to_json(const SynthSpec& spec) {
    nlohmann::json mods = nlohmann::json::array();
    for (const auto& m : spec.modalities) mods.push_back({{"id", m.id}, {"rate", m.rate}});
    return {{"n_classes", spec.n_classes},
            {"samples_per_class", spec.samples_per_class},
            {"duration", spec.duration},
            {"modalities", mods},
            {"frame_dim", spec.frame_dim},
            {"coding", coding_name(spec.coding)},
            {"offset_frac", spec.offset_frac},
            {"evidence_width", spec.evidence_width},
            {"evidence_span", spec.evidence_span},
            {"noise_sigma", spec.noise_sigma},
            {"amplitude", spec.amplitude},
            {"informative", spec.informative},
            {"distractor_rate", spec.distractor_rate},
            {"held_out_fraction", spec.held_out_fraction},
            {"multitask_nouns", spec.multitask_nouns},
            {"n_nouns", spec.n_nouns},
            {"audio_waveform", spec.audio_waveform}};
}

SynthSpec synth_spec_from_json(const nlohmann::json& j, SynthSpec s) {
    if (!j.is_object()) throw ConfigError("synth section must be an object");
    try {
        for (const auto& [key, v] : j.items()) {
            if (key == "n_classes") s.n_classes = v.get<int>();
            else if (key == "samples_per_class") s.samples_per_class = v.get<int>();
            else if (key == "duration") s.duration = v.get<double>();
            else if (key == "frame_dim") s.frame_dim = v.get<std::size_t>();
            else if (key == "offset_frac") s.offset_frac = v.get<double>();
            else if (key == "evidence_width") s.evidence_width = v.get<double>();
            else if (key == "evidence_span") s.evidence_span = v.get<double>();
            else if (key == "noise_sigma") s.noise_sigma = v.get<double>();
            else if (key == "amplitude") s.amplitude = v.get<double>();
            else if (key == "informative") s.informative = v.get<std::vector<std::vector<bool>>>();
            else if (key == "distractor_rate") s.distractor_rate = v.get<double>();
            else if (key == "held_out_fraction") s.held_out_fraction = v.get<double>();
            else if (key == "multitask_nouns") s.multitask_nouns = v.get<bool>();
            else if (key == "n_nouns") s.n_nouns = v.get<int>();
            else if (key == "audio_waveform") s.audio_waveform = v.get<bool>();
            else if (key == "coding") {
                const auto c = v.get<std::string>();
                if (c == "keyed") s.coding = EvidenceCoding::keyed;
                else if (c == "template") s.coding = EvidenceCoding::template_class;
                else throw ConfigError("synth.coding must be 'keyed' or 'template', got '" + c + "'");
            } else if (key == "modalities") {
                s.modalities.clear();
                for (const auto& m : v) {
                    for (const auto& [mk, _] : m.items()) {
                        if (mk != "id" && mk != "rate") throw ConfigError("unknown key 'synth.modalities[]." + mk + "'");
                    }
                    s.modalities.push_back({m.at("id").get<std::string>(), m.at("rate").get<double>(),
                                            ModalityKind::vector_frame});
                }
            } else {
                throw ConfigError("unknown key 'synth." + key + "'");
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("synth section: ") + e.what());
    }
    return s;
}

}  // namespace tbn
