#include "rlrp/model_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>

#include <json.hpp>

#include "rlrp/errors.hpp"

namespace rlrp {

using nlohmann::json;

namespace {

struct BlobRange {
  std::uint64_t offset;
  std::uint64_t length;
  std::string what;
};

class BlobReader {
 public:
  explicit BlobReader(const std::vector<std::uint8_t>& blob) : blob_(blob) {}

  Tensor tensor(const json& ref, const std::string& what) {
    if (!ref.is_object()) throw FormatError(what + ": tensor reference must be an object");
    Shape shape = ref.at("shape").get<Shape>();
    const auto offset = ref.at("offset").get<std::uint64_t>();
    const auto length = ref.at("length").get<std::uint64_t>();
    if (shape.empty() || std::find(shape.begin(), shape.end(), 0u) != shape.end())
      throw ModelShapeError(what + ": invalid shape " + shape_string(shape));
    const std::uint64_t need = std::uint64_t(shape_size(shape)) * 4;
    if (length != need)
      throw ModelShapeError(what + ": shape " + shape_string(shape) + " needs " +
                            std::to_string(need) + " bytes, manifest declares " +
                            std::to_string(length));
    if (offset > blob_.size() || length > blob_.size() - offset)
      throw TruncatedBlobError(what + ": bytes [" + std::to_string(offset) + ", " +
                               std::to_string(offset + length) + ") past end of " +
                               std::to_string(blob_.size()) + "-byte blob");
    ranges_.push_back({offset, length, what});

    std::vector<double> values(shape_size(shape));
    for (std::size_t i = 0; i < values.size(); ++i) {
      const std::uint8_t* p = blob_.data() + offset + 4 * i;
      const std::uint32_t bits = std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) |
                                 (std::uint32_t(p[2]) << 16) | (std::uint32_t(p[3]) << 24);
      const double v = std::bit_cast<float>(bits);
      if (!std::isfinite(v))
        throw NonFiniteWeightError(what + ": non-finite value at element " + std::to_string(i));
      values[i] = v;
    }
    return Tensor(std::move(shape), std::move(values));
  }

  void finish() {
    std::sort(ranges_.begin(), ranges_.end(),
              [](const BlobRange& a, const BlobRange& b) { return a.offset < b.offset; });
    std::uint64_t total = 0;
    for (std::size_t i = 0; i < ranges_.size(); ++i) {
      if (i > 0 && ranges_[i - 1].offset + ranges_[i - 1].length > ranges_[i].offset)
        throw FormatError(ranges_[i - 1].what + " overlaps " + ranges_[i].what + " in blob");
      total += ranges_[i].length;
    }
    if (total != blob_.size())
      throw FormatError("blob is " + std::to_string(blob_.size()) +
                        " bytes but the manifest accounts for " + std::to_string(total));
  }

 private:
  const std::vector<std::uint8_t>& blob_;
  std::vector<BlobRange> ranges_;
};

std::pair<std::size_t, std::size_t> pair_of(const json& j, const char* key) {
  const auto v = j.at(key).get<std::vector<std::size_t>>();
  if (v.size() != 2) throw FormatError(std::string(key) + " must have two entries");
  if (v[0] == 0 || v[1] == 0) throw ModelShapeError(std::string(key) + " entries must be >= 1");
  return {v[0], v[1]};
}

Padding padding_of(const json& j) {
  const auto p = j.value("padding", std::string("valid"));
  if (p == "valid") return Padding::valid;
  if (p == "same") return Padding::same;
  throw FormatError("unknown padding '" + p + "'");
}

Conv2D parse_conv(const json& j, BlobReader& blob, const std::string& where) {
  Conv2D c;
  c.kernel = blob.tensor(j.at("kernel"), where + " kernel");
  if (j.contains("bias")) c.bias = blob.tensor(j.at("bias"), where + " bias");
  std::tie(c.stride_h, c.stride_w) = pair_of(j, "strides");
  c.padding = padding_of(j);
  return c;
}

std::vector<Layer> parse_layers(const json& list, BlobReader& blob, const std::string& prefix) {
  if (!list.is_array()) throw FormatError("layers must be an array");
  std::vector<Layer> layers;
  for (std::size_t i = 0; i < list.size(); ++i) {
    const json& j = list[i];
    const std::string where = prefix + "layer " + std::to_string(i);
    const auto type = j.at("type").get<std::string>();
    if (type == "dense") {
      Dense d;
      d.weights = blob.tensor(j.at("weights"), where + " weights");
      d.bias = blob.tensor(j.at("bias"), where + " bias");
      layers.emplace_back(std::move(d));
    } else if (type == "conv2d") {
      layers.emplace_back(parse_conv(j, blob, where));
    } else if (type == "maxpool2d" || type == "avgpool2d") {
      const auto [ph, pw] = pair_of(j, "pool");
      const auto [sh, sw] = pair_of(j, "strides");
      if (type == "maxpool2d") layers.emplace_back(MaxPool2D{ph, pw, sh, sw});
      else layers.emplace_back(AvgPool2D{ph, pw, sh, sw});
    } else if (type == "flatten") {
      layers.emplace_back(Flatten{});
    } else if (type == "relu") {
      layers.emplace_back(ReLU{});
    } else if (type == "residual") {
      ResidualBlock b;
      b.branch = parse_layers(j.at("branch"), blob, where + " branch ");
      const json& skip = j.at("skip");
      const auto kind = skip.at("type").get<std::string>();
      if (kind == "projection") b.projection = parse_conv(skip, blob, where + " projection");
      else if (kind != "identity") throw FormatError(where + ": unknown skip type '" + kind + "'");
      layers.emplace_back(std::move(b));
    } else {
      throw FormatError(where + ": unknown layer type '" + type + "'");
    }
  }
  return layers;
}

// --- writing ---------------------------------------------------------------

class BlobWriter {
 public:
  json tensor(const Tensor& t) {
    json ref = {{"shape", t.shape()}, {"offset", bytes_.size()}, {"length", t.size() * 4}};
    for (double v : t.values()) {
      const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
      for (int b = 0; b < 4; ++b) bytes_.push_back(std::uint8_t(bits >> (8 * b)));
    }
    return ref;
  }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

json conv_json(const Conv2D& c, BlobWriter& blob) {
  json j = {{"kernel", blob.tensor(c.kernel)},
            {"strides", {c.stride_h, c.stride_w}},
            {"padding", c.padding == Padding::valid ? "valid" : "same"}};
  if (!c.bias.empty()) j["bias"] = blob.tensor(c.bias);
  return j;
}

json layers_json(const std::vector<Layer>& layers, BlobWriter& blob) {
  json list = json::array();
  for (const auto& layer : layers) {
    json j;
    if (const auto* d = std::get_if<Dense>(&layer.kind)) {
      j = {{"type", "dense"}};
      j["weights"] = blob.tensor(d->weights);
      j["bias"] = blob.tensor(d->bias);
    } else if (const auto* c = std::get_if<Conv2D>(&layer.kind)) {
      j = conv_json(*c, blob);
      j["type"] = "conv2d";
    } else if (const auto* m = std::get_if<MaxPool2D>(&layer.kind)) {
      j = {{"type", "maxpool2d"}, {"pool", {m->pool_h, m->pool_w}}, {"strides", {m->stride_h, m->stride_w}}};
    } else if (const auto* a = std::get_if<AvgPool2D>(&layer.kind)) {
      j = {{"type", "avgpool2d"}, {"pool", {a->pool_h, a->pool_w}}, {"strides", {a->stride_h, a->stride_w}}};
    } else if (std::holds_alternative<Flatten>(layer.kind)) {
      j = {{"type", "flatten"}};
    } else if (std::holds_alternative<ReLU>(layer.kind)) {
      j = {{"type", "relu"}};
    } else {
      const auto& b = std::get<ResidualBlock>(layer.kind);
      j = {{"type", "residual"}};
      j["branch"] = layers_json(b.branch, blob);
      if (b.projection) {
        j["skip"] = conv_json(*b.projection, blob);
        j["skip"]["type"] = "projection";
      } else {
        j["skip"] = {{"type", "identity"}};
      }
    }
    list.push_back(std::move(j));
  }
  return list;
}

}  // namespace

Network parse_model(const std::string& manifest_text, const std::vector<std::uint8_t>& blob) {
  json m;
  try {
    m = json::parse(manifest_text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("manifest is not valid JSON: ") + e.what());
  }
  try {
    if (!m.is_object()) throw FormatError("manifest must be a JSON object");
    const int version = m.at("format_version").get<int>();
    if (version != model_format_version)
      throw VersionError("unsupported model format_version " + std::to_string(version) +
                         " (expected " + std::to_string(model_format_version) + ")");
    Network net;
    net.name = m.value("name", std::string());
    net.input_shape = m.at("input_shape").get<Shape>();
    net.num_outputs = m.at("num_outputs").get<std::size_t>();
    if (m.contains("class_labels")) net.class_labels = m.at("class_labels").get<std::vector<std::string>>();
    if (m.contains("preprocessing")) {
      const json& p = m.at("preprocessing");
      const auto mode = p.at("mode").get<std::string>();
      if (mode == "unit") {
        net.preprocessing.mode = PreprocessMode::unit;
      } else if (mode == "centered") {
        net.preprocessing.mode = PreprocessMode::centered;
        net.preprocessing.channel_means = p.at("means").get<std::vector<double>>();
      } else {
        throw FormatError("unknown preprocessing mode '" + mode + "'");
      }
    }
    BlobReader reader(blob);
    net.layers = parse_layers(m.at("layers"), reader, "");
    reader.finish();
    net.validate();
    return net;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed manifest: ") + e.what());
  }
}

Network load_model(const std::filesystem::path& manifest_path,
                   const std::filesystem::path& blob_path) {
  return parse_model(read_file_text(manifest_path), read_file_bytes(blob_path));
}

SerializedModel save_model(const Network& net) {
  BlobWriter blob;
  json m;
  m["format_version"] = model_format_version;
  m["name"] = net.name;
  m["input_shape"] = net.input_shape;
  m["num_outputs"] = net.num_outputs;
  if (!net.class_labels.empty()) m["class_labels"] = net.class_labels;
  if (net.preprocessing.mode == PreprocessMode::centered)
    m["preprocessing"] = {{"mode", "centered"}, {"means", net.preprocessing.channel_means}};
  else
    m["preprocessing"] = {{"mode", "unit"}};
  m["layers"] = layers_json(net.layers, blob);
  return {m.dump(2) + "\n", blob.take()};
}

void write_model(const Network& net, const std::filesystem::path& manifest_path,
                 const std::filesystem::path& blob_path) {
  const auto s = save_model(net);
  write_file_text(manifest_path, s.manifest);
  write_file_bytes(blob_path, s.blob);
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

std::string read_file_text(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  return {bytes.begin(), bytes.end()};
}

void write_file_text(const std::filesystem::path& path, const std::string& text) {
  write_file_bytes(path, {text.begin(), text.end()});
}

std::vector<std::uint8_t> encode_f64(const Tensor& t) {
  std::vector<std::uint8_t> out;
  out.reserve(t.size() * 8);
  for (double v : t.values()) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int b = 0; b < 8; ++b) out.push_back(std::uint8_t(bits >> (8 * b)));
  }
  return out;
}

}  // namespace rlrp
