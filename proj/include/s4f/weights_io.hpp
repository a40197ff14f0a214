// S4FW weight container: magic "S4FW", u32 version, u32 tensor count,
// per-tensor records (u32 name length, name bytes, u8 dtype, u32 rank,
// u64 dims, payload 8-byte aligned from file start), trailing CRC32.
// Little-endian throughout; tensors stored in lexicographic name order,
// so save -> load -> save is byte-identical. The model-level functions
// embed the FusionConfig as config/* tensors, making fuse runs
// self-describing from the weights file alone.
#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "s4f/network.hpp"
#include "s4f/tensor.hpp"

namespace s4f {

inline constexpr std::uint32_t kWeightFileVersion = 1;

std::uint32_t crc32(const void* data, std::size_t size);

using TensorMap = std::map<std::string, Tensor>;

std::string encode_tensors(const TensorMap& tensors);
TensorMap decode_tensors(const std::string& bytes, const std::string& origin);

void save_tensors(const std::string& path, const TensorMap& tensors);
TensorMap load_tensors(const std::string& path);

TensorMap weights_to_tensors(const ModelWeights& w);
ModelWeights weights_from_tensors(const TensorMap& tensors);

void save_weights(const std::string& path, const ModelWeights& w);
ModelWeights load_weights(const std::string& path);

}  // namespace s4f
