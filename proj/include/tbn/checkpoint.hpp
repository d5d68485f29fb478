#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "tbn/tensor.hpp"

namespace tbn {

enum class DType : std::uint8_t { f32 = 1, f64 = 2 };

struct NamedTensor {
    std::string name;
    std::variant<Tensor<float>, Tensor<double>> tensor;
};

/// Binary layout (all integers little-endian):
///   "TBNCKPT\0" | u32 format_version | u64 header_len | header (UTF-8 JSON)
///   | u64 tensor_count | tensor*
/// tensor: u32 name_len | name (UTF-8) | u8 dtype | u32 rank | u64 dims[rank] | payload
/// Payload is the row-major data as IEEE-754 little-endian. Round-trips are bit-exact.
struct Checkpoint {
    static constexpr std::uint32_t kFormatVersion = 1;

    std::uint32_t format_version = kFormatVersion;
    nlohmann::json hyperparameters = nlohmann::json::object();
    std::vector<NamedTensor> tensors;

    const NamedTensor* find(const std::string& name) const;
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes, const std::string& source = "<memory>");

void write_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::string& path);

}  // namespace tbn
