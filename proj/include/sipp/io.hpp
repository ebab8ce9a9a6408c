#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "sipp/network.hpp"
#include "sipp/tensor.hpp"

namespace sipp {

/// Model bundle: a directory holding `model.json` (layer manifest with byte
/// offsets into the weight file) and `weights.bin` (little-endian float64,
/// layers in order, each weight tensor row-major followed by its bias).
inline constexpr const char* kManifestName = "model.json";
inline constexpr const char* kWeightsName = "weights.bin";

void save_model(const std::filesystem::path& dir, const Network& net);
Network load_model(const std::filesystem::path& dir);

/// Count of exactly-zero prunable weights is recorded in the manifest; this
/// returns the nonzero count.
std::size_t count_nonzero_weights(const Network& net);

/// Tensor batch file: "SIPT", u32 version (1), u32 rank, rank x u64 extents,
/// then little-endian float64 values row-major.
inline constexpr std::uint32_t kTensorFileVersion = 1;

void write_tensor_file(const std::filesystem::path& path, const Tensor& t);
Tensor read_tensor_file(const std::filesystem::path& path);

}  // namespace sipp
