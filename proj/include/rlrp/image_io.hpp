#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "rlrp/tensor.hpp"

namespace rlrp {

/// Binary Netpbm raster (P5 grey or P6 RGB), maxval 255.
struct Raster {
  std::size_t width = 0, height = 0, channels = 0;
  std::vector<std::uint8_t> pixels;  // row-major, interleaved channels
};

Raster decode_pnm(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> encode_pnm(const Raster& raster);

/// P6 image as an [H, W, 3] tensor scaled to [0, 1]. P5 files load as
/// [H, W, 1].
Tensor load_image(const std::filesystem::path& path);
Tensor raster_to_tensor(const Raster& raster);
/// Inverse of load_image; values are clamped to [0, 1] and rounded.
Raster tensor_to_raster(const Tensor& image);
void save_image(const Tensor& image, const std::filesystem::path& path);

/// Writes a 0/1 mask: [H, W] or [H, W, 1] as P5, [H, W, 3] as P6;
/// selected = 255, unselected = 0.
std::vector<std::uint8_t> encode_mask(const Tensor& mask);
void save_mask(const Tensor& mask, const std::filesystem::path& path);

/// Reads a grey (or RGB, first channel) mask file as an [H, W] 0/1 tensor;
/// values above 127 are object.
Tensor load_object_mask(const std::filesystem::path& path);

}  // namespace rlrp
