#include "tbn/dataset.hpp"

#include <algorithm>
#include <filesystem>
#include <sstream>

#include "tbn/error.hpp"
#include "tbn/io.hpp"

namespace fs = std::filesystem;

namespace tbn {

std::size_t Dataset::modality_index(const std::string& id) const {
    for (std::size_t m = 0; m < modalities.size(); ++m) {
        if (modalities[m].id == id) return m;
    }
    throw ConfigError("unknown modality '" + id + "'");
}

std::vector<std::size_t> Dataset::split_indices(const std::string& split) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (split.empty() || records[i].split == split) out.push_back(i);
    }
    return out;
}

std::set<std::string> Dataset::tag_vocabulary() const {
    std::set<std::string> tags;
    for (const auto& r : records) tags.insert(r.segment.tags.begin(), r.segment.tags.end());
    return tags;
}

std::vector<std::size_t> Dataset::verb_counts(const std::string& split) const {
    std::vector<std::size_t> counts(static_cast<std::size_t>(n_verbs), 0);
    for (auto i : split_indices(split)) ++counts[static_cast<std::size_t>(records[i].segment.verb_class)];
    return counts;
}

void Dataset::validate() const {
    if (modalities.empty()) throw ConfigError("dataset has no modalities");
    if (frame_dims.size() != modalities.size()) throw ConfigError("frame_dims does not match modalities");
    std::set<std::string> ids;
    for (const auto& m : modalities) {
        m.validate();
        if (!ids.insert(m.id).second) throw ConfigError("duplicate modality id '" + m.id + "'");
    }
    for (const auto& r : records) {
        r.segment.validate();
        if (r.segment.verb_class < 0 || r.segment.verb_class >= n_verbs || r.segment.noun_class < 0 ||
            r.segment.noun_class >= n_nouns) {
            throw ConfigError("record '" + r.segment.video_id + "' has a label outside the class range");
        }
        if (r.streams.size() != modalities.size()) {
            throw ConfigError("record '" + r.segment.video_id + "' does not carry every modality");
        }
    }
}

nlohmann::json record_to_json(const Record& r, const std::vector<ModalitySpec>& modalities) {
    nlohmann::json streams = nlohmann::json::object();
    for (std::size_t m = 0; m < modalities.size(); ++m) streams[modalities[m].id] = r.stream_paths.at(m);
    return {{"video_id", r.segment.video_id},
            {"start", r.segment.start},
            {"end", r.segment.end},
            {"verb_class", r.segment.verb_class},
            {"noun_class", r.segment.noun_class},
            {"tags", std::vector<std::string>(r.segment.tags.begin(), r.segment.tags.end())},
            {"streams", streams},
            {"split", r.split}};
}

namespace {

const char* kind_name(ModalityKind k) { return k == ModalityKind::audio_waveform ? "audio-waveform" : "vector-frame"; }

ModalityKind parse_kind(const std::string& s, const std::string& path) {
    if (s == "vector-frame") return ModalityKind::vector_frame;
    if (s == "audio-waveform") return ModalityKind::audio_waveform;
    throw IoError(path, "unknown modality kind '" + s + "'");
}

StreamData read_stream(const std::string& path, ModalitySpec& spec, std::size_t& frame_dim, bool first) {
    const auto meta = read_json_file(sidecar_path(path));
    StreamData s;
    try {
        if (meta.contains("sample_rate")) {
            s.wave = audio::read_waveform(path);
            if (first) {
                spec.kind = ModalityKind::audio_waveform;
                spec.rate = s.wave.sample_rate;
                frame_dim = 0;
            }
        } else {
            const auto rate = meta.at("rate").get<double>();
            const auto dim = meta.at("frame_dim").get<std::size_t>();
            const auto length = meta.at("length").get<std::size_t>();
            auto values = read_f32_file(path);
            if (values.size() != length * dim) {
                throw IoError(path, "sidecar shape [" + std::to_string(length) + ", " + std::to_string(dim) +
                                        "] does not match " + std::to_string(values.size()) + " values");
            }
            s.frames = Tensor<float>({length, dim}, std::move(values));
            if (first) {
                spec.kind = ModalityKind::vector_frame;
                spec.rate = rate;
                frame_dim = dim;
            } else if (rate != spec.rate || dim != frame_dim) {
                throw IoError(path, "stream rate/frame_dim differ from the first record of modality '" + spec.id + "'");
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw IoError(sidecar_path(path), std::string("bad sidecar: ") + e.what());
    }
    return s;
}

}  // namespace

void write_dataset(const std::string& dir, const Dataset& ds) {
    ds.validate();
    ensure_directory(dir);
    std::ostringstream manifest;
    for (const auto& r : ds.records) {
        for (std::size_t m = 0; m < ds.modalities.size(); ++m) {
            const std::string path = (fs::path(dir) / r.stream_paths.at(m)).string();
            if (ds.modalities[m].kind == ModalityKind::audio_waveform) {
                audio::write_waveform(path, r.streams[m].wave);
            } else {
                const auto& f = r.streams[m].frames;
                write_f32_file(path, f.values());
                write_json_file(sidecar_path(path),
                                {{"rate", ds.modalities[m].rate}, {"frame_dim", f.dim(1)}, {"length", f.dim(0)}});
            }
        }
        manifest << record_to_json(r, ds.modalities).dump() << '\n';
    }
    write_text_file((fs::path(dir) / "manifest.jsonl").string(), manifest.str());

    nlohmann::json mods = nlohmann::json::array();
    for (std::size_t m = 0; m < ds.modalities.size(); ++m) {
        mods.push_back({{"id", ds.modalities[m].id},
                        {"rate", ds.modalities[m].rate},
                        {"kind", kind_name(ds.modalities[m].kind)},
                        {"frame_dim", ds.frame_dims[m]}});
    }
    write_json_file((fs::path(dir) / "dataset.json").string(),
                    {{"modalities", mods}, {"n_verbs", ds.n_verbs}, {"n_nouns", ds.n_nouns}});
}

Dataset load_dataset(const std::string& manifest_path) {
    fs::path manifest = manifest_path;
    if (fs::is_directory(manifest)) manifest /= "manifest.jsonl";
    const fs::path dir = manifest.parent_path();
    const std::string text = read_text_file(manifest.string());

    Dataset ds;
    std::istringstream lines(text);
    std::string line;
    int line_no = 0;
    int max_verb = -1, max_noun = -1;
    while (std::getline(lines, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::string where = manifest.string() + ":" + std::to_string(line_no);
        Record r;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
            r.segment.video_id = j.at("video_id").get<std::string>();
            r.segment.start = j.at("start").get<double>();
            r.segment.end = j.at("end").get<double>();
            r.segment.verb_class = j.at("verb_class").get<int>();
            r.segment.noun_class = j.at("noun_class").get<int>();
            for (const auto& t : j.value("tags", nlohmann::json::array())) r.segment.tags.insert(t.get<std::string>());
            r.split = j.value("split", std::string("train"));
        } catch (const nlohmann::json::exception& e) {
            throw IoError(where, std::string("bad manifest record: ") + e.what());
        }
        const auto& streams = j.at("streams");
        if (ds.modalities.empty()) {
            for (const auto& [id, _] : streams.items()) ds.modalities.push_back({id, 1.0, ModalityKind::vector_frame});
            ds.frame_dims.assign(ds.modalities.size(), 0);
        }
        if (streams.size() != ds.modalities.size()) throw IoError(where, "record does not list every modality");
        const bool first = ds.records.empty();
        for (std::size_t m = 0; m < ds.modalities.size(); ++m) {
            if (!streams.contains(ds.modalities[m].id)) {
                throw IoError(where, "missing stream for modality '" + ds.modalities[m].id + "'");
            }
            const auto rel = streams.at(ds.modalities[m].id).get<std::string>();
            r.stream_paths.push_back(rel);
            r.streams.push_back(read_stream((dir / rel).string(), ds.modalities[m], ds.frame_dims[m], first));
        }
        max_verb = std::max(max_verb, r.segment.verb_class);
        max_noun = std::max(max_noun, r.segment.noun_class);
        ds.records.push_back(std::move(r));
    }
    if (ds.records.empty()) throw IoError(manifest.string(), "manifest has no records");

    ds.n_verbs = max_verb + 1;
    ds.n_nouns = max_noun + 1;
    const fs::path meta_path = dir / "dataset.json";
    if (fs::exists(meta_path)) {
        const auto meta = read_json_file(meta_path.string());
        try {
            ds.n_verbs = std::max(ds.n_verbs, meta.at("n_verbs").get<int>());
            ds.n_nouns = std::max(ds.n_nouns, meta.at("n_nouns").get<int>());
            for (const auto& m : meta.at("modalities")) {
                const auto id = m.at("id").get<std::string>();
                for (auto& spec : ds.modalities) {
                    if (spec.id == id) spec.kind = parse_kind(m.at("kind").get<std::string>(), meta_path.string());
                }
            }
            // Keep the modality order declared at generation time (anchor first).
            std::vector<std::size_t> order;
            for (const auto& m : meta.at("modalities")) order.push_back(ds.modality_index(m.at("id").get<std::string>()));
            if (order.size() == ds.modalities.size()) {
                auto reorder = [&](auto& v) {
                    auto copy = v;
                    for (std::size_t i = 0; i < order.size(); ++i) v[i] = copy[order[i]];
                };
                reorder(ds.modalities);
                reorder(ds.frame_dims);
                for (auto& r : ds.records) {
                    reorder(r.stream_paths);
                    reorder(r.streams);
                }
            }
        } catch (const nlohmann::json::exception& e) {
            throw IoError(meta_path.string(), std::string("bad dataset metadata: ") + e.what());
        }
    }
    ds.validate();
    return ds;
}

}  // namespace tbn
