#include "rlrp/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <random>
#include <exception>
#include <thread>

#include <json.hpp>

#include "rlrp/errors.hpp"
#include "rlrp/image_io.hpp"
#include "rlrp/model_io.hpp"

namespace rlrp {

using json = nlohmann::json;

std::string to_string(MaskMode mode) {
  switch (mode) {
    case MaskMode::input_signed: return "input-signed";
    case MaskMode::input_abs: return "input-abs";
    case MaskMode::pixel_signed: return "pixel-signed";
    case MaskMode::pixel_abs: return "pixel-abs";
  }
  return "?";
}

MaskMode parse_mask_mode(const std::string& text) {
  for (auto m : {MaskMode::input_signed, MaskMode::input_abs, MaskMode::pixel_signed,
                 MaskMode::pixel_abs})
    if (to_string(m) == text) return m;
  throw DomainError("unknown mask mode '" + text + "'");
}

bool is_pixel_mode(MaskMode mode) {
  return mode == MaskMode::pixel_signed || mode == MaskMode::pixel_abs;
}

namespace {

Ordering ordering_of(MaskMode mode) {
  return mode == MaskMode::input_abs || mode == MaskMode::pixel_abs ? Ordering::absolute
                                                                    : Ordering::signed_value;
}

void check_percent(double percent) {
  if (!(percent > 0.0 && percent <= 100.0))
    throw DomainError("percentage must be in (0, 100], got " + std::to_string(percent));
}

void check_image_shape(const Shape& s) {
  if (s.size() != 3) throw DimensionError("expected an [H,W,C] image, got " + shape_string(s));
}

Tensor indices_to_mask(Shape shape, const std::vector<std::size_t>& idx) {
  Tensor mask(std::move(shape));
  for (auto i : idx) mask[i] = 1.0;
  return mask;
}

// Selection count per pixel for [H,W] masks, per entry otherwise.
std::vector<std::pair<std::size_t, double>> selected_pixels(const Tensor& selection,
                                                            const Tensor& object) {
  if (object.rank() != 2) throw DimensionError("object mask must be [H,W]");
  const std::size_t h = object.extent(0), w = object.extent(1);
  std::size_t c = 1;
  if (selection.rank() == 3) {
    c = selection.extent(2);
  } else if (selection.rank() != 2) {
    throw DimensionError("selection must be [H,W] or [H,W,C]");
  }
  if (selection.extent(0) != h || selection.extent(1) != w)
    throw DimensionError("selection " + shape_string(selection.shape()) +
                         " does not match object " + shape_string(object.shape()));
  std::vector<std::pair<std::size_t, double>> out;
  for (std::size_t p = 0; p < h * w; ++p) {
    double n = 0;
    for (std::size_t ch = 0; ch < c; ++ch) n += selection[p * c + ch] != 0.0 ? 1.0 : 0.0;
    if (n > 0) out.emplace_back(p, n);
  }
  if (out.empty()) throw DomainError("selection is empty");
  return out;
}

bool has_object(const Tensor& object) {
  return std::any_of(object.values().begin(), object.values().end(),
                     [](double v) { return v != 0.0; });
}

}  // namespace

Tensor make_mask(const Tensor& values, double percent, MaskMode mode) {
  check_image_shape(values.shape());
  check_percent(percent);
  if (is_pixel_mode(mode)) {
    const Tensor pix = pixel_contributions(values);
    const auto idx = top_fraction_indices(pix.values(), percent / 100.0, ordering_of(mode));
    return indices_to_mask({values.extent(0), values.extent(1)}, idx);
  }
  const auto idx = top_fraction_indices(values.values(), percent / 100.0, ordering_of(mode));
  return indices_to_mask(values.shape(), idx);
}

Tensor make_mask(const ContributionMap& map, double percent, MaskMode mode) {
  return make_mask(map.values, percent, mode);
}

Tensor random_mask(const Shape& image_shape, double percent, MaskMode mode, std::uint64_t seed) {
  check_image_shape(image_shape);
  check_percent(percent);
  Shape shape = is_pixel_mode(mode) ? Shape{image_shape[0], image_shape[1]} : image_shape;
  const std::size_t n = shape_size(shape);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  // Fisher-Yates with explicit draws so the result does not depend on the
  // standard library's shuffle implementation.
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = std::size_t(rng() % i);
    std::swap(order[i - 1], order[j]);
  }
  order.resize(selection_count(percent / 100.0, n));
  return indices_to_mask(std::move(shape), order);
}

Tensor apply_mask(const Tensor& image, const Tensor& mask) {
  check_image_shape(image.shape());
  Tensor out = image;
  if (mask.shape() == image.shape()) {
    for (std::size_t i = 0; i < out.size(); ++i)
      if (mask[i] == 0.0) out[i] = 0.0;
    return out;
  }
  if (mask.rank() != 2 || mask.extent(0) != image.extent(0) || mask.extent(1) != image.extent(1))
    throw DimensionError("mask " + shape_string(mask.shape()) + " does not fit image " +
                         shape_string(image.shape()));
  const std::size_t c = image.extent(2);
  for (std::size_t p = 0; p < mask.size(); ++p)
    if (mask[p] == 0.0)
      for (std::size_t ch = 0; ch < c; ++ch) out[p * c + ch] = 0.0;
  return out;
}

double pointing_game(const Tensor& selection, const Tensor& object) {
  const auto sel = selected_pixels(selection, object);
  double hits = 0, total = 0;
  for (const auto& [p, n] : sel) {
    total += n;
    if (object[p] != 0.0) hits += n;
  }
  return hits / total;
}

namespace {

// Lower envelope of parabolas (y - q)^2 + f[q] over the candidate rows,
// with breakpoints kept as exact rationals num/den (den > 0).
struct Breakpoint {
  std::int64_t num = 0, den = 1;
  int inf = 0;  // -1 or +1 for the sentinels
};

// `a` is always finite.
bool less_equal(const Breakpoint& a, const Breakpoint& b) {
  if (b.inf) return b.inf > 0;
  return a.num * b.den <= b.num * a.den;
}

void envelope_column(const std::vector<std::int64_t>& f, std::vector<std::int64_t>& d) {
  const std::int64_t n = std::int64_t(f.size());
  constexpr std::int64_t none = -1;
  std::vector<std::int64_t> v;
  std::vector<Breakpoint> z;
  auto intersect = [&](std::int64_t q, std::int64_t p) {
    return Breakpoint{(f[q] + q * q) - (f[p] + p * p), 2 * (q - p), 0};
  };
  for (std::int64_t q = 0; q < n; ++q) {
    if (f[q] == none) continue;
    if (v.empty()) {
      v.push_back(q);
      z = {{0, 1, -1}, {0, 1, 1}};
      continue;
    }
    Breakpoint s = intersect(q, v.back());
    while (less_equal(s, z[v.size() - 1])) {
      v.pop_back();
      z.pop_back();
      s = intersect(q, v.back());
    }
    v.push_back(q);
    z.back() = s;
    z.push_back({0, 1, 1});
  }
  std::size_t k = 0;
  for (std::int64_t y = 0; y < n; ++y) {
    // advance while z[k+1] < y
    while (z[k + 1].inf != 1 && z[k + 1].num < y * z[k + 1].den) ++k;
    const std::int64_t dy = y - v[k];
    d[y] = dy * dy + f[v[k]];
  }
}

}  // namespace

Tensor distance_transform(const Tensor& object) {
  if (object.rank() != 2) throw DimensionError("object mask must be [H,W]");
  if (!has_object(object)) throw DomainError("object mask is empty");
  const std::size_t h = object.extent(0), w = object.extent(1);
  constexpr std::int64_t none = -1;
  // Row pass: squared horizontal distance to the nearest object pixel.
  std::vector<std::int64_t> g(h * w, none);
  for (std::size_t y = 0; y < h; ++y) {
    std::int64_t last = none;
    for (std::size_t x = 0; x < w; ++x) {
      if (object[y * w + x] != 0.0) last = std::int64_t(x);
      if (last != none) g[y * w + x] = std::int64_t(x) - last;
    }
    last = none;
    for (std::size_t x = w; x-- > 0;) {
      if (object[y * w + x] != 0.0) last = std::int64_t(x);
      if (last != none) {
        const std::int64_t dx = last - std::int64_t(x);
        if (g[y * w + x] == none || dx < g[y * w + x]) g[y * w + x] = dx;
      }
    }
    for (std::size_t x = 0; x < w; ++x)
      if (g[y * w + x] != none) g[y * w + x] *= g[y * w + x];
  }
  Tensor out({h, w});
  std::vector<std::int64_t> f(h), d(h);
  for (std::size_t x = 0; x < w; ++x) {
    for (std::size_t y = 0; y < h; ++y) f[y] = g[y * w + x];
    envelope_column(f, d);
    for (std::size_t y = 0; y < h; ++y) out[y * w + x] = std::sqrt(double(d[y]));
  }
  return out;
}

double avg_distance(const Tensor& selection, const Tensor& object) {
  const auto sel = selected_pixels(selection, object);
  const Tensor dt = distance_transform(object);
  double acc = 0, total = 0;
  for (const auto& [p, n] : sel) {
    acc += n * dt[p];
    total += n;
  }
  const double hh = double(object.extent(0)), ww = double(object.extent(1));
  return acc / total / std::sqrt(hh * hh + ww * ww);
}

// --- dataset ----------------------------------------------------------------

std::vector<double> default_percentages() {
  return {1, 5, 10, 15, 20, 25, 40, 50, 60, 75, 80, 85, 90, 95, 99};
}

void validate_percentages(const std::vector<double>& percentages) {
  if (percentages.empty()) throw DomainError("percentage list is empty");
  for (std::size_t i = 0; i < percentages.size(); ++i) {
    check_percent(percentages[i]);
    if (i > 0 && !(percentages[i] > percentages[i - 1]))
      throw DomainError("percentages must be strictly increasing");
  }
}

DatasetManifest load_dataset(const std::filesystem::path& path) {
  const std::string text = read_file_text(path);
  const auto base = path.parent_path();
  DatasetManifest m;
  try {
    const json doc = json::parse(text);
    if (doc.contains("percentages")) m.percentages = doc.at("percentages").get<std::vector<double>>();
    for (const auto& r : doc.at("records")) {
      DatasetRecord rec;
      rec.image = base / r.at("image").get<std::string>();
      if (r.contains("mask") && !r.at("mask").is_null())
        rec.mask = base / r.at("mask").get<std::string>();
      if (r.contains("label") && !r.at("label").is_null()) rec.label = r.at("label").get<std::size_t>();
      m.records.push_back(std::move(rec));
    }
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  validate_percentages(m.percentages);
  return m;
}

std::vector<Sample> load_samples(const DatasetManifest& manifest) {
  std::vector<Sample> out;
  out.reserve(manifest.records.size());
  for (const auto& rec : manifest.records) {
    Sample s{load_image(rec.image), std::nullopt};
    if (rec.mask) {
      Tensor m = load_object_mask(*rec.mask);
      if (m.extent(0) != s.image.extent(0) || m.extent(1) != s.image.extent(1))
        throw FormatError(rec.mask->string() + ": mask size does not match image");
      s.object = std::move(m);
    }
    out.push_back(std::move(s));
  }
  return out;
}

// --- harness ----------------------------------------------------------------

std::string to_string(Metric metric) {
  switch (metric) {
    case Metric::accuracy: return "accuracy";
    case Metric::pointing_game: return "pointing_game";
    case Metric::avg_distance: return "avg_distance";
  }
  return "?";
}

std::uint64_t image_seed(std::uint64_t run_seed, std::size_t image_index) {
  // splitmix64 finaliser over the pair
  std::uint64_t z = run_seed + 0x9E3779B97F4A7C15ull * (std::uint64_t(image_index) + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

namespace {

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct ImageOutcome {
  bool skipped = false;
  std::string reason;
  bool agree = false;
  std::vector<double> correct, pointing, distance;
};

template <class Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn fn) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (std::size_t t = 0; t < workers; ++t)
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = t; i < n; i += workers) fn(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

bool wants(const EvalOptions& o, Metric m) {
  return std::find(o.metrics.begin(), o.metrics.end(), m) != o.metrics.end();
}


EvalReport run(const Network& net_a, const Network& net_b, const std::vector<Sample>& samples,
               const MethodSpec& method, const EvalOptions& o, bool cross) {
  validate_percentages(o.percentages);
  if (method.config) method.config->validate();
  std::vector<ImageOutcome> results(samples.size());
  parallel_for(samples.size(), o.workers, [&](std::size_t i) {
    const Sample& s = samples[i];
    ImageOutcome& out = results[i];
    const ForwardResult fr = forward(net_a, preprocess(net_a, s.image));
    const std::size_t k = argmax(fr.logits.values());
    const std::size_t k_ref = cross ? predict_class(net_b, preprocess(net_b, s.image)) : k;
    out.agree = k == k_ref;
    std::optional<ContributionMap> map;
    if (method.config) {
      try {
        map = attribute(net_a, fr.trace, k, *method.config);
      } catch (const NumericError& e) {
        out.skipped = true;
        out.reason = "image " + std::to_string(i) + ": " + e.what();
        return;
      }
    }
    for (std::size_t p = 0; p < o.percentages.size(); ++p) {
      const double pct = o.percentages[p];
      const Tensor mask = map ? make_mask(*map, pct, o.mode)
                              : random_mask(s.image.shape(), pct, o.mode,
                                            image_seed(image_seed(o.seed, i), p));
      if (wants(o, Metric::accuracy)) {
        const Tensor masked = apply_mask(s.image, mask);
        const std::size_t km = predict_class(net_b, preprocess(net_b, masked));
        out.correct.push_back(km == k_ref ? 1.0 : 0.0);
      }
      if (s.object && has_object(*s.object)) {
        if (wants(o, Metric::pointing_game)) out.pointing.push_back(pointing_game(mask, *s.object));
        if (wants(o, Metric::avg_distance)) out.distance.push_back(avg_distance(mask, *s.object));
      }
    }
  });

  EvalReport report;
  std::size_t skipped = 0, agree = 0;
  for (const auto& r : results) {
    if (r.skipped) {
      ++skipped;
      report.skip_log.push_back(r.reason);
    }
    if (r.agree) ++agree;
  }
  const std::string mode = to_string(o.mode);
  for (std::size_t p = 0; p < o.percentages.size(); ++p) {
    for (Metric m : o.metrics) {
      double sum = 0;
      std::size_t n = 0;
      for (const auto& r : results) {
        if (r.skipped) continue;
        const auto& v = m == Metric::accuracy        ? r.correct
                        : m == Metric::pointing_game ? r.pointing
                                                     : r.distance;
        if (v.empty()) continue;
        sum += v[p];
        ++n;
      }
      const double value = n ? sum / double(n) : std::numeric_limits<double>::quiet_NaN();
      report.rows.push_back({method.name, mode, o.percentages[p], to_string(m), value, n, skipped});
    }
  }
  if (cross)
    report.rows.push_back({method.name, mode, 100.0, "agreement", double(agree), samples.size(), 0});
  return report;
}

}  // namespace

std::string EvalReport::to_csv() const {
  std::string out = "method,mode,percentage,metric,value,n_images,n_skipped\n";
  for (const auto& r : rows) {
    out += r.method + "," + r.mode + "," + format_number(r.percentage) + "," + r.metric + "," +
           format_number(r.value) + "," + std::to_string(r.n_images) + "," +
           std::to_string(r.n_skipped) + "\n";
  }
  return out;
}

const ReportRow* EvalReport::find(const std::string& method, const std::string& metric,
                                  double percentage) const {
  for (const auto& r : rows)
    if (r.method == method && r.metric == metric && r.percentage == percentage) return &r;
  return nullptr;
}

void EvalReport::append(EvalReport other) {
  rows.insert(rows.end(), other.rows.begin(), other.rows.end());
  skip_log.insert(skip_log.end(), other.skip_log.begin(), other.skip_log.end());
}

EvalReport evaluate(const Network& net, const std::vector<Sample>& samples,
                    const MethodSpec& method, const EvalOptions& options) {
  return run(net, net, samples, method, options, false);
}

EvalReport accuracy_curve(const Network& net, const std::vector<Sample>& samples,
                          const MethodSpec& method, const EvalOptions& options) {
  EvalOptions o = options;
  o.metrics = {Metric::accuracy};
  return run(net, net, samples, method, o, false);
}

EvalReport cross_compare(const Network& net_a, const Network& net_b,
                         const std::vector<Sample>& samples, const MethodSpec& method,
                         const EvalOptions& options) {
  EvalOptions o = options;
  o.metrics = {Metric::accuracy};
  return run(net_a, net_b, samples, method, o, true);
}

}  // namespace rlrp
