#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace tbn {

/// Raw little-endian float32 array files. Errors carry the path.
void write_f32_file(const std::string& path, std::span<const float> values);
std::vector<float> read_f32_file(const std::string& path);

void write_bytes_file(const std::string& path, std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> read_bytes_file(const std::string& path);

void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

nlohmann::json read_json_file(const std::string& path);
/// Pretty-printed with sorted keys and a trailing newline, so output is byte-stable.
void write_json_file(const std::string& path, const nlohmann::json& value);

/// Sidecar path for a raw stream file: "<path>.json".
inline std::string sidecar_path(const std::string& path) { return path + ".json"; }

/// Creates `dir` and its parents if missing.
void ensure_directory(const std::string& dir);

}  // namespace tbn
