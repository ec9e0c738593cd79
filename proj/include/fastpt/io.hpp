#pragma once

// Tensor files: "FPTW", u32 version, then entries of
// (u32 name length, name bytes, u32 rank, u32 dims[rank], f32 payload)
// until end of file. All integers and floats little-endian.

#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fastpt/model.hpp"

namespace fastpt {

inline constexpr std::uint32_t kTensorFileVersion = 1;

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

void write_tensor_file(const std::filesystem::path& path,
                       const std::vector<std::pair<std::string, const Tensor*>>& entries);
NamedTensors read_tensor_file(const std::filesystem::path& path);

void save_weights(const std::filesystem::path& path, const ModelWeights& weights);
/// Entries must match the names and shapes implied by config.
ModelWeights load_weights(const std::filesystem::path& path, const ModelConfig& config);

void save_prompt(const std::filesystem::path& path, const SoftPrompt& prompt);
SoftPrompt load_prompt(const std::filesystem::path& path);

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, std::string_view text);

}  // namespace fastpt
