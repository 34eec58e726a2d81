#include "rlrp/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "rlrp/dag_oracle.hpp"
#include "rlrp/errors.hpp"
#include "rlrp/eval.hpp"
#include "rlrp/image_io.hpp"
#include "rlrp/model_io.hpp"

namespace rlrp {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string model, blob, model_b, blob_b, dataset, image, out;
  std::vector<std::string> methods{"rlrp"};
  std::string mode = "pixel-abs";
  std::string percentages;
  double eps = 0.01, gamma = 0.25, alpha = 0.5, beta = 0.5;
  std::size_t workers = 1;
  std::uint64_t seed = 0;
  std::optional<std::size_t> cls;
};

MethodSpec method_spec(const Options& o, const std::string& method, bool allow_random) {
  MethodConfig cfg;
  if (method == "rlrp") {
    cfg.rule = RLrp{};
  } else if (method == "lrp0") {
    cfg.rule = Lrp0{};
  } else if (method == "lrp-eps") {
    cfg.rule = LrpEpsilon{o.eps};
  } else if (method == "lrp-gamma") {
    cfg.rule = LrpGamma{o.gamma};
  } else if (method == "lrp-ab") {
    cfg.rule = LrpAlphaBeta{o.alpha, o.beta};
  } else if (method == "random" && allow_random) {
    return MethodSpec::random_baseline();
  } else {
    throw UsageError("method '" + method + "' is not available here");
  }
  try {
    cfg.validate();
  } catch (const DomainError& e) {
    throw UsageError(e.what());
  }
  return MethodSpec::from(cfg);
}

MaskMode mask_mode(const Options& o) {
  try {
    return parse_mask_mode(o.mode);
  } catch (const DomainError& e) {
    throw UsageError(e.what());
  }
}

std::vector<MethodSpec> method_specs(const Options& o, bool allow_random) {
  std::vector<MethodSpec> out;
  for (const auto& m : o.methods) out.push_back(method_spec(o, m, allow_random));
  return out;
}

std::vector<double> parse_percentages(const std::string& text, std::vector<double> fallback) {
  if (text.empty()) return fallback;
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::logic_error&) {
      throw UsageError("bad percentage '" + item + "'");
    }
  }
  try {
    validate_percentages(out);
  } catch (const DomainError& e) {
    throw UsageError(e.what());
  }
  return out;
}

const char* error_name(const Error& e) {
  if (dynamic_cast<const GuardedDenominatorError*>(&e)) return "GuardedDenominatorError";
  if (dynamic_cast<const NumericError*>(&e)) return "NumericError";
  if (dynamic_cast<const DimensionError*>(&e)) return "DimensionError";
  if (dynamic_cast<const DomainError*>(&e)) return "DomainError";
  if (dynamic_cast<const SizeError*>(&e)) return "SizeError";
  if (dynamic_cast<const VersionError*>(&e)) return "VersionError";
  if (dynamic_cast<const TruncatedBlobError*>(&e)) return "TruncatedBlobError";
  if (dynamic_cast<const ModelShapeError*>(&e)) return "ModelShapeError";
  if (dynamic_cast<const NonFiniteWeightError*>(&e)) return "NonFiniteWeightError";
  if (dynamic_cast<const FormatError*>(&e)) return "FormatError";
  if (dynamic_cast<const IoError*>(&e)) return "IoError";
  return "Error";
}

std::string pct_tag(double pct) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", pct);
  return buf;
}

void emit(const Options& o, const std::string& text, std::ostream& out) {
  if (o.out.empty()) {
    out << text;
  } else {
    write_file_text(o.out, text);
  }
}

int cmd_explain(const Options& o, std::ostream& out) {
  const Network net = load_model(o.model, o.blob);
  if (o.methods.size() != 1) throw UsageError("explain takes exactly one method");
  const MethodSpec spec = method_spec(o, o.methods.front(), false);
  const MaskMode mode = mask_mode(o);
  const auto pcts = parse_percentages(o.percentages, default_percentages());
  const Tensor raw = load_image(o.image);
  if (raw.shape() != net.input_shape)
    throw DimensionError("image " + shape_string(raw.shape()) + " does not match model input " +
                         shape_string(net.input_shape));
  const ForwardResult fr = forward(net, preprocess(net, raw));
  const std::size_t predicted = argmax(fr.logits.values());
  const std::size_t k = o.cls.value_or(predicted);
  if (k >= net.num_outputs)
    throw UsageError("class " + std::to_string(k) + " out of range");
  const ContributionMap map = attribute(net, fr.trace, k, *spec.config);

  const fs::path dir = o.out.empty() ? fs::path(".") : fs::path(o.out);
  fs::create_directories(dir);
  write_file_bytes(dir / "contributions.bin", encode_f64(map.values));
  json meta;
  meta["shape"] = map.values.shape();
  meta["dtype"] = "float64-le";
  meta["class"] = k;
  meta["predicted"] = predicted;
  if (k < net.class_labels.size()) meta["class_label"] = net.class_labels[k];
  meta["method"] = spec.name;
  meta["mode"] = to_string(mode);
  meta["logits"] = fr.logits.values();
  json sums = json::array();
  for (const auto& s : map.per_layer_sums)
    sums.push_back({{"layer", s.layer}, {"tag", s.tag}, {"sum", s.sum}});
  meta["per_layer_sums"] = sums;
  meta["diagnostics"] = map.diagnostics;
  json masks = json::array();
  for (double pct : pcts) {
    const Tensor mask = make_mask(map, pct, mode);
    const std::string name =
        "mask_p" + pct_tag(pct) + (mask.rank() == 3 && mask.extent(2) == 3 ? ".ppm" : ".pgm");
    save_mask(mask, dir / name);
    masks.push_back({{"percentage", pct}, {"file", name}});
  }
  meta["masks"] = masks;
  write_file_text(dir / "contributions.json", meta.dump(2) + "\n");
  out << "class " << k << " (predicted " << predicted << "), method " << spec.name << ", input sum "
      << map.values.sum() << ", wrote " << (dir / "contributions.bin").string() << "\n";
  return exit_ok;
}

int cmd_eval(const Options& o, Metric metric, std::ostream& out, std::ostream& err) {
  const Network net = load_model(o.model, o.blob);
  const auto specs = method_specs(o, true);
  const DatasetManifest ds = load_dataset(o.dataset);
  EvalOptions opts;
  opts.mode = mask_mode(o);
  opts.percentages = parse_percentages(o.percentages, ds.percentages);
  opts.metrics = {metric};
  opts.workers = o.workers;
  opts.seed = o.seed;
  const auto samples = load_samples(ds);
  EvalReport report;
  for (const auto& spec : specs) report.append(evaluate(net, samples, spec, opts));
  for (const auto& line : report.skip_log) err << "skipped " << line << "\n";
  emit(o, report.to_csv(), out);
  return exit_ok;
}

int cmd_cross(const Options& o, std::ostream& out, std::ostream& err) {
  const Network a = load_model(o.model, o.blob);
  const Network b = load_model(o.model_b, o.blob_b);
  if (a.input_shape != b.input_shape || a.num_outputs != b.num_outputs)
    throw UsageError("models differ in input shape or number of outputs");
  const auto specs = method_specs(o, true);
  const DatasetManifest ds = load_dataset(o.dataset);
  EvalOptions opts;
  opts.mode = mask_mode(o);
  opts.percentages = parse_percentages(o.percentages, ds.percentages);
  opts.workers = o.workers;
  opts.seed = o.seed;
  const auto samples = load_samples(ds);
  EvalReport report;
  for (const auto& spec : specs) report.append(cross_compare(a, b, samples, spec, opts));
  for (const auto& line : report.skip_log) err << "skipped " << line << "\n";
  emit(o, report.to_csv(), out);
  return exit_ok;
}

int cmd_verify(const Options& o, std::ostream& out) {
  const Network net = load_model(o.model, o.blob);
  Tensor input;
  if (!o.image.empty()) {
    input = preprocess(net, load_image(o.image));
  } else {
    std::mt19937_64 rng(o.seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    input = Tensor(net.input_shape);
    for (auto& v : input.values()) v = u(rng);
    input = preprocess(net, input);
  }
  const bool residual = std::any_of(net.layers.begin(), net.layers.end(), [](const Layer& l) {
    return std::holds_alternative<ResidualBlock>(l.kind);
  });
  if (residual) {
    out << "oracle: not applicable to residual blocks\n";
    return exit_ok;
  }
  const auto g = oracle::explode(net, input);
  const auto acts = oracle::oracle_forward(g, input);
  const ForwardResult fr = forward(net, input);
  const std::size_t k = o.cls.value_or(argmax(fr.logits.values()));
  if (k >= net.num_outputs) throw UsageError("class " + std::to_string(k) + " out of range");
  double worst = 0;
  for (auto [rule, cfg] : {std::pair{oracle::OracleRule::rlrp, MethodConfig{RLrp{}}},
                           std::pair{oracle::OracleRule::lrp0, MethodConfig{Lrp0{}}}}) {
    std::string status;
    double diff = 0;
    try {
      const auto ref = oracle::source_values(g, oracle::oracle_attribute(g, acts, k, rule));
      const ContributionMap map = attribute(net, fr.trace, k, cfg);
      diff = oracle::max_relative_difference(map.values.values(), ref);
      worst = std::max(worst, diff);
      char buf[96];
      std::snprintf(buf, sizeof buf, "%s oracle max relative difference %.3g", diff <= 1e-8 ? "PASS" : "FAIL", diff);
      status = buf;
    } catch (const GuardedDenominatorError& e) {
      // LRP0 may legitimately refuse; R-LRP never should.
      if (rule == oracle::OracleRule::rlrp) worst = std::numeric_limits<double>::infinity();
      status = std::string(rule == oracle::OracleRule::rlrp ? "FAIL" : "SKIP") + " refused (" + e.what() + ")";
    }
    out << cfg.label() << ": " << status << "\n";
  }
  out << "vertices " << g.vertices().size() << ", edges " << g.edges().size() << "\n";
  return worst <= 1e-8 ? exit_ok : exit_numeric;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Relevance propagation and masking evaluation"};
  app.require_subcommand(1);
  Options o;

  auto model_opts = [&](CLI::App* c) {
    c->add_option("--model", o.model, "model manifest (JSON)")->required();
    c->add_option("--blob", o.blob, "model weight blob")->required();
  };
  auto method_opts = [&](CLI::App* c) {
    c->add_option("--method", o.methods,
                  "rlrp, lrp0, lrp-eps, lrp-gamma, lrp-ab or random; comma-separated for several")
        ->delimiter(',')
        ->capture_default_str();
    c->add_option("--eps", o.eps, "epsilon for lrp-eps")->capture_default_str();
    c->add_option("--gamma", o.gamma, "gamma for lrp-gamma")->capture_default_str();
    c->add_option("--alpha", o.alpha, "alpha for lrp-ab")->capture_default_str();
    c->add_option("--beta", o.beta, "beta for lrp-ab")->capture_default_str();
    c->add_option("--mode", o.mode, "input-signed, input-abs, pixel-signed or pixel-abs")
        ->capture_default_str();
    c->add_option("--percentages", o.percentages, "comma-separated, e.g. 10,20,50");
  };
  auto eval_opts = [&](CLI::App* c) {
    c->add_option("--dataset", o.dataset, "dataset manifest (JSON)")->required();
    c->add_option("--out", o.out, "CSV output path (default stdout)");
    c->add_option("--workers", o.workers, "parallel workers")->capture_default_str()
        ->check(CLI::PositiveNumber);
    c->add_option("--seed", o.seed, "random baseline seed")->capture_default_str();
  };

  auto* explain = app.add_subcommand("explain", "attribute one image and write masks");
  model_opts(explain);
  method_opts(explain);
  explain->add_option("--image", o.image, "PPM image")->required();
  explain->add_option("--class", o.cls, "output to explain (default: predicted)");
  explain->add_option("--out", o.out, "output directory")->required();

  auto* eval = app.add_subcommand("eval", "accuracy under top-p% masking");
  auto* pointing = app.add_subcommand("pointing", "pointing game");
  auto* distance = app.add_subcommand("distance", "average distance to the object");
  for (auto* c : {eval, pointing, distance}) {
    model_opts(c);
    method_opts(c);
    eval_opts(c);
  }

  auto* cross = app.add_subcommand("cross", "masks from model A, accuracy of model B");
  model_opts(cross);
  cross->add_option("--model-b", o.model_b, "second model manifest")->required();
  cross->add_option("--blob-b", o.blob_b, "second model blob")->required();
  method_opts(cross);
  eval_opts(cross);

  auto* verify = app.add_subcommand("verify", "compare with the edge-level oracle");
  model_opts(verify);
  verify->add_option("--image", o.image, "PPM image (default: seeded random input)");
  verify->add_option("--class", o.cls, "output to explain (default: predicted)");
  verify->add_option("--seed", o.seed, "seed for the random input")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? exit_ok : exit_usage;
  }

  try {
    if (explain->parsed()) return cmd_explain(o, out);
    if (eval->parsed()) return cmd_eval(o, Metric::accuracy, out, err);
    if (pointing->parsed()) return cmd_eval(o, Metric::pointing_game, out, err);
    if (distance->parsed()) return cmd_eval(o, Metric::avg_distance, out, err);
    if (cross->parsed()) return cmd_cross(o, out, err);
    if (verify->parsed()) return cmd_verify(o, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return exit_usage;
  } catch (const IoError& e) {
    err << error_name(e) << ": " << e.what() << "\n";
    return exit_io;
  } catch (const fs::filesystem_error& e) {
    err << "IoError: " << e.what() << "\n";
    return exit_io;
  } catch (const Error& e) {
    err << error_name(e) << ": " << e.what() << "\n";
    return exit_numeric;
  }
  return exit_usage;
}

}  // namespace rlrp
