#include "tbn/io.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "tbn/error.hpp"

namespace tbn {

static_assert(std::endian::native == std::endian::little, "float32 stream files assume a little-endian host");

void write_bytes_file(const std::string& path, std::span<const std::uint8_t> bytes) {
    const auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) ensure_directory(parent.string());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(path, "cannot open for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError(path, "write failed");
}

std::vector<std::uint8_t> read_bytes_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(path, "cannot open for reading");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw IoError(path, "read failed");
    return bytes;
}

void write_f32_file(const std::string& path, std::span<const float> values) {
    write_bytes_file(path, std::span(reinterpret_cast<const std::uint8_t*>(values.data()), values.size_bytes()));
}

std::vector<float> read_f32_file(const std::string& path) {
    const auto bytes = read_bytes_file(path);
    if (bytes.size() % sizeof(float) != 0) {
        throw IoError(path, "size " + std::to_string(bytes.size()) + " is not a multiple of 4 bytes");
    }
    std::vector<float> values(bytes.size() / sizeof(float));
    std::memcpy(values.data(), bytes.data(), bytes.size());
    return values;
}

void write_text_file(const std::string& path, const std::string& text) {
    write_bytes_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string read_text_file(const std::string& path) {
    const auto bytes = read_bytes_file(path);
    return std::string(bytes.begin(), bytes.end());
}

nlohmann::json read_json_file(const std::string& path) {
    const auto text = read_text_file(path);
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw IoError(path, std::string("invalid JSON: ") + e.what());
    }
}

void write_json_file(const std::string& path, const nlohmann::json& value) {
    write_text_file(path, value.dump(2) + "\n");
}

void ensure_directory(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError(dir, "cannot create directory: " + ec.message());
}

}  // namespace tbn
