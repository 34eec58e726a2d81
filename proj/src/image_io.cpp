#include "rlrp/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

#include "rlrp/errors.hpp"
#include "rlrp/model_io.hpp"

namespace rlrp {

namespace {

class HeaderCursor {
 public:
  explicit HeaderCursor(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  // Skips whitespace and '#' comments, then reads an unsigned decimal.
  std::size_t number(const char* field) {
    for (;;) {
      if (pos_ >= bytes_.size()) throw FormatError(std::string("PNM header ends before ") + field);
      const char c = char(bytes_[pos_]);
      if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else {
        break;
      }
    }
    std::size_t value = 0, digits = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      value = value * 10 + std::size_t(bytes_[pos_] - '0');
      if (++digits > 9) throw FormatError(std::string("PNM ") + field + " too large");
      ++pos_;
    }
    if (digits == 0) throw FormatError(std::string("PNM header: expected ") + field);
    return value;
  }

  // Exactly one whitespace byte separates maxval from the raster.
  std::size_t raster_start() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_]))
      throw FormatError("PNM header: missing whitespace before raster");
    return pos_ + 1;
  }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 2;
};

}  // namespace

Raster decode_pnm(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6'))
    throw FormatError("not a binary PGM/PPM file (expected P5 or P6)");
  Raster r;
  r.channels = bytes[1] == '6' ? 3 : 1;
  HeaderCursor cur(bytes);
  r.width = cur.number("width");
  r.height = cur.number("height");
  const std::size_t maxval = cur.number("maxval");
  if (r.width == 0 || r.height == 0) throw FormatError("PNM image has a zero dimension");
  if (maxval != 255) throw FormatError("unsupported PNM maxval " + std::to_string(maxval));
  const std::size_t start = cur.raster_start();
  const std::size_t need = r.width * r.height * r.channels;
  if (bytes.size() - start < need)
    throw FormatError("PNM raster truncated: need " + std::to_string(need) + " bytes, have " +
                      std::to_string(bytes.size() - start));
  r.pixels.assign(bytes.begin() + std::ptrdiff_t(start), bytes.begin() + std::ptrdiff_t(start + need));
  return r;
}

std::vector<std::uint8_t> encode_pnm(const Raster& r) {
  if (r.channels != 1 && r.channels != 3) throw DomainError("PNM rasters have 1 or 3 channels");
  if (r.pixels.size() != r.width * r.height * r.channels)
    throw DimensionError("raster pixel count does not match its dimensions");
  const std::string header = std::string(r.channels == 3 ? "P6" : "P5") + "\n" +
                             std::to_string(r.width) + " " + std::to_string(r.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), r.pixels.begin(), r.pixels.end());
  return out;
}

Tensor raster_to_tensor(const Raster& r) {
  std::vector<double> values(r.pixels.size());
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = double(r.pixels[i]) / 255.0;
  return Tensor({r.height, r.width, r.channels}, std::move(values));
}

Tensor load_image(const std::filesystem::path& path) {
  try {
    return raster_to_tensor(decode_pnm(read_file_bytes(path)));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

Raster tensor_to_raster(const Tensor& image) {
  if (image.rank() != 3 || (image.extent(2) != 1 && image.extent(2) != 3))
    throw DimensionError("image must be [H,W,1] or [H,W,3], got " + shape_string(image.shape()));
  Raster r{image.extent(1), image.extent(0), image.extent(2), {}};
  r.pixels.resize(image.size());
  for (std::size_t i = 0; i < image.size(); ++i)
    r.pixels[i] = std::uint8_t(std::lround(std::clamp(image[i], 0.0, 1.0) * 255.0));
  return r;
}

void save_image(const Tensor& image, const std::filesystem::path& path) {
  write_file_bytes(path, encode_pnm(tensor_to_raster(image)));
}

std::vector<std::uint8_t> encode_mask(const Tensor& mask) {
  Raster r;
  if (mask.rank() == 2) {
    r = {mask.extent(1), mask.extent(0), 1, {}};
  } else if (mask.rank() == 3 && (mask.extent(2) == 1 || mask.extent(2) == 3)) {
    r = {mask.extent(1), mask.extent(0), mask.extent(2), {}};
  } else {
    throw DimensionError("mask must be [H,W], [H,W,1] or [H,W,3], got " + shape_string(mask.shape()));
  }
  r.pixels.resize(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) r.pixels[i] = mask[i] != 0.0 ? 255 : 0;
  return encode_pnm(r);
}

void save_mask(const Tensor& mask, const std::filesystem::path& path) {
  write_file_bytes(path, encode_mask(mask));
}

Tensor load_object_mask(const std::filesystem::path& path) {
  Raster r;
  try {
    r = decode_pnm(read_file_bytes(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  Tensor mask({r.height, r.width});
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = r.pixels[i * r.channels] > 127 ? 1.0 : 0.0;
  return mask;
}

}  // namespace rlrp
