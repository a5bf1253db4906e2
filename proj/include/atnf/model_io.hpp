#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "atnf/network.hpp"

// Single-file model container, little-endian throughout:
//
//   "ATNF"  u32 version  u64 seed
//   u32 stage_count  u32 stage_channels[stage_count]
//   u32 trained_phases  u32 frozen_families  u32 criterion
//   u32 tensor_count
//   per tensor: u32 name_len, name bytes, u8 dtype (1 = f32), u32 rank,
//               u32 dims[rank], f32 values[prod(dims)]
namespace atnf::model_io {

inline constexpr std::uint32_t kFormatVersion = 1;
inline constexpr std::uint8_t kDtypeF32 = 1;

std::string serialize(const ModelGraph& model);
/// Throws ModelError for a bad header, unknown/missing/misshapen tensors or truncation.
ModelGraph deserialize(const std::string& bytes);

void save(const ModelGraph& model, const std::filesystem::path& path);
/// Missing file -> DataError; malformed content -> ModelError.
ModelGraph load(const std::filesystem::path& path);

}  // namespace atnf::model_io
