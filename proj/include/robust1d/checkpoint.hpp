#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "robust1d/model.hpp"

namespace robust1d {

// Binary tensor archive:
//   "MDF1" | version u32 | records...
//   record = name_len u32 | name bytes | rank u32 | dims u32 x rank | f64 x prod(dims)
// All integers and reals little-endian. Records are written in sorted-name
// order and read in any order.

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> encode_checkpoint(const ParameterMap& tensors);
ParameterMap decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const std::filesystem::path& path, const ParameterMap& tensors);
ParameterMap load_checkpoint(const std::filesystem::path& path);

}  // namespace robust1d
