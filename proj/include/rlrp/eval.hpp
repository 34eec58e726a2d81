#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "rlrp/network.hpp"
#include "rlrp/relevance.hpp"

namespace rlrp {

/// Granularity and ordering of top-p% selections. Input modes rank all
/// H*W*C entries; pixel modes sum the channels first and rank H*W pixels.
enum class MaskMode { input_signed, input_abs, pixel_signed, pixel_abs };

std::string to_string(MaskMode mode);  // "input-signed", ...
MaskMode parse_mask_mode(const std::string& text);
bool is_pixel_mode(MaskMode mode);

/// 0/1 mask keeping the `percent`% highest-ranked entries of a contribution
/// map. Shaped [H, W] for pixel modes and like `values` for input modes.
Tensor make_mask(const Tensor& values, double percent, MaskMode mode);
Tensor make_mask(const ContributionMap& map, double percent, MaskMode mode);

/// Uniformly random selection with the same size and granularity as
/// make_mask, driven only by `seed`.
Tensor random_mask(const Shape& image_shape, double percent, MaskMode mode, std::uint64_t seed);

/// Zeroes unselected entries. An [H, W] mask applies to every channel.
Tensor apply_mask(const Tensor& image, const Tensor& mask);

/// Fraction of selected entries lying on object pixels. `selection` is
/// [H, W] or [H, W, C]; `object` is [H, W].
double pointing_game(const Tensor& selection, const Tensor& object);

/// Exact Euclidean distance from every pixel to the nearest object pixel
/// (0 on the object). Row scan followed by a lower-envelope column pass.
Tensor distance_transform(const Tensor& object);

/// Mean distance of selected entries to the object, divided by the image
/// diagonal sqrt(H^2 + W^2).
double avg_distance(const Tensor& selection, const Tensor& object);

// --- dataset ----------------------------------------------------------------

std::vector<double> default_percentages();
/// Strictly increasing, each in (0, 100]. 100 is allowed so callers can
/// request the unmasked control point.
void validate_percentages(const std::vector<double>& percentages);

struct DatasetRecord {
  std::filesystem::path image;
  std::optional<std::filesystem::path> mask;
  std::optional<std::size_t> label;
};

struct DatasetManifest {
  std::vector<DatasetRecord> records;
  std::vector<double> percentages = default_percentages();
};

/// JSON document {"percentages": [...], "records": [{"image", "mask",
/// "label"}]}; relative paths resolve against the manifest's directory.
DatasetManifest load_dataset(const std::filesystem::path& path);

struct Sample {
  Tensor image;  // raw [0, 1] image, before preprocessing
  std::optional<Tensor> object;
};

/// Loads every image and object mask, checking mask dims against images.
std::vector<Sample> load_samples(const DatasetManifest& manifest);

// --- harness ----------------------------------------------------------------

/// An attribution method, or the seeded random baseline when `config` is empty.
struct MethodSpec {
  std::string name;
  std::optional<MethodConfig> config;

  static MethodSpec random_baseline() { return {"random", std::nullopt}; }
  static MethodSpec from(const MethodConfig& cfg) { return {cfg.label(), cfg}; }
};

enum class Metric { accuracy, pointing_game, avg_distance };
std::string to_string(Metric metric);

struct EvalOptions {
  MaskMode mode = MaskMode::pixel_abs;
  std::vector<double> percentages = default_percentages();
  std::vector<Metric> metrics = {Metric::accuracy};
  std::size_t workers = 1;
  std::uint64_t seed = 0;
};

struct ReportRow {
  std::string method;
  std::string mode;
  double percentage = 0.0;
  std::string metric;
  double value = 0.0;
  std::size_t n_images = 0;
  std::size_t n_skipped = 0;
};

struct EvalReport {
  std::vector<ReportRow> rows;
  std::vector<std::string> skip_log;

  /// Header "method,mode,percentage,metric,value,n_images,n_skipped".
  std::string to_csv() const;
  const ReportRow* find(const std::string& method, const std::string& metric,
                        double percentage) const;
  void append(EvalReport other);
};

/// Per image: predict k, attribute k, then for each percentage mask the
/// raw image, re-predict and compare with k. Pointing and distance metrics
/// use images that carry an object mask. Attribution failures skip the
/// image and are logged.
EvalReport evaluate(const Network& net, const std::vector<Sample>& samples,
                    const MethodSpec& method, const EvalOptions& options);

EvalReport accuracy_curve(const Network& net, const std::vector<Sample>& samples,
                          const MethodSpec& method, const EvalOptions& options);

/// Masks come from net_a's attributions of its own prediction; accuracy is
/// net_b's agreement with its own unmasked prediction. Adds an "agreement"
/// row counting images where both nets predict the same class unmasked.
EvalReport cross_compare(const Network& net_a, const Network& net_b,
                         const std::vector<Sample>& samples, const MethodSpec& method,
                         const EvalOptions& options);

/// Deterministic per-image seed derived from the run seed.
std::uint64_t image_seed(std::uint64_t run_seed, std::size_t image_index);

}  // namespace rlrp
