#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "rlrp/network.hpp"

namespace rlrp {

inline constexpr int model_format_version = 1;

/// Manifest text plus weight blob. The manifest is JSON; the blob holds
/// little-endian binary32 values, row-major, in manifest order.
struct SerializedModel {
  std::string manifest;
  std::vector<std::uint8_t> blob;
};

/// Parses and fully validates a model. Errors: VersionError,
/// TruncatedBlobError, ModelShapeError, NonFiniteWeightError, FormatError.
Network parse_model(const std::string& manifest_text, const std::vector<std::uint8_t>& blob);
Network load_model(const std::filesystem::path& manifest_path,
                   const std::filesystem::path& blob_path);

/// Weights are narrowed to binary32; tensors are laid out back to back.
SerializedModel save_model(const Network& net);
void write_model(const Network& net, const std::filesystem::path& manifest_path,
                 const std::filesystem::path& blob_path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);
std::string read_file_text(const std::filesystem::path& path);
void write_file_text(const std::filesystem::path& path, const std::string& text);

/// Raw little-endian binary64 dump of a tensor's values.
std::vector<std::uint8_t> encode_f64(const Tensor& t);

}  // namespace rlrp
