// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Runs only on committed fixtures and seeded random nets.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

#include "random_nets.hpp"
#include "rlrp/cli.hpp"
#include "rlrp/dag_oracle.hpp"
#include "rlrp/errors.hpp"
#include "rlrp/eval.hpp"
#include "rlrp/image_io.hpp"
#include "rlrp/model_io.hpp"
#include "rlrp/relevance.hpp"

using namespace rlrp;
using testing::pick;
using testing::random_tensor;
using testing::rel_diff;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

const fs::path fixtures = RLRP_FIXTURE_DIR;
const MethodConfig rlrp_cfg{RLrp{}};
const MethodConfig lrp0_cfg{Lrp0{}};

struct Outcome {
  bool pass = true;
  std::string detail;
};

Network fixture(const std::string& stem) {
  return load_model(fixtures / (stem + ".json"), fixtures / (stem + ".bin"));
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::vector<Sample> dataset_samples() {
  return load_samples(load_dataset(fixtures / "squares" / "dataset.json"));
}

// --- criteria ---------------------------------------------------------------

Outcome oracle_equivalence() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(1001);
  std::vector<Network> nets;
  for (int i = 0; i < 100; ++i) nets.push_back(testing::random_dense_net(rng));
  // windows that leave an input uncovered fall outside the graph model; redraw those
  std::size_t redrawn = 0;
  while (nets.size() < 200) {
    Network n = testing::random_conv_net(rng);
    try {
      oracle::explode(n, Tensor(n.input_shape, 1.0)).topological_order();
      nets.push_back(std::move(n));
    } catch (const DomainError&) {
      ++redrawn;
    }
  }
  for (const char* stem : {"dense2", "conv_pool", "detector"}) nets.push_back(fixture(stem));

  double worst_rlrp = 0, worst_lrp0 = 0;
  std::size_t lrp0_checked = 0;
  for (const Network& net : nets) {
    const Tensor x = testing::random_input(net, rng);
    const auto g = oracle::explode(net, x);
    const auto acts = oracle::oracle_forward(g, x);
    const ForwardResult fr = forward(net, x);
    for (std::size_t k = 0; k < net.num_outputs; ++k) {
      const auto ref = oracle::source_values(g, oracle::oracle_attribute(g, acts, k, oracle::OracleRule::rlrp));
      const auto map = attribute(net, fr.trace, k, rlrp_cfg);
      worst_rlrp = std::max(worst_rlrp, oracle::max_relative_difference(map.values.values(), ref));
      // LRP0 only where every denominator that carries relevance is >= 0.1
      std::vector<double> ref0;
      try {
        ref0 = oracle::source_values(
            g, oracle::oracle_attribute(g, acts, k, oracle::OracleRule::lrp0, 0.1));
      } catch (const GuardedDenominatorError&) {
        continue;
      }
      const auto map0 = attribute(net, fr.trace, k, lrp0_cfg);
      worst_lrp0 = std::max(worst_lrp0, oracle::max_relative_difference(map0.values.values(), ref0));
      ++lrp0_checked;
    }
  }
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = worst_rlrp <= 1e-8 && worst_lrp0 <= 1e-8 && lrp0_checked >= 100 && secs < 30;
  o.detail = std::to_string(nets.size()) + " nets, R-LRP max rel diff " + fmt("%.2e", worst_rlrp) +
             ", LRP0 max rel diff " + fmt("%.2e", worst_lrp0) + " over " +
             std::to_string(lrp0_checked) + " guarded outputs, " +
             std::to_string(redrawn) + " uncovered conv nets redrawn, " + fmt("%.1f s", secs);
  return o;
}

// Positive and negative parts of every active dense neuron are at least `bound`.
bool alpha_beta_bounded(const Network& net, const ForwardTrace& trace, std::size_t k, double bound) {
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const auto* d = std::get_if<Dense>(&net.layers[l].kind);
    if (!d) continue;
    const Tensor& x = trace.layers[l].input;
    const bool last = l + 1 == net.layers.size();
    const Tensor& after = last ? trace.layers[l].output : trace.layers[l + 1].output;
    for (std::size_t j = 0; j < d->weights.extent(0); ++j) {
      if (last ? j != k : after[j] == 0.0) continue;
      double pos = 0, neg = 0;
      for (std::size_t i = 0; i < x.size(); ++i) {
        const double p = d->weights.at(j, i) * x[i];
        (p > 0 ? pos : neg) += p;
      }
      if (pos < bound || -neg < bound) return false;
    }
  }
  return true;
}

Outcome conservation() {
  std::mt19937_64 rng(1002);
  testing::NetOptions opt;
  opt.zero_bias = true;
  double worst = 0;
  std::size_t lrp0_nets = 0, ab_nets = 0, attempts = 0;
  auto check_sums = [&](const ContributionMap& m, double logit) {
    for (const auto& s : m.per_layer_sums) worst = std::max(worst, std::abs(s.sum - logit) / std::abs(logit));
  };
  while ((lrp0_nets < 60 || ab_nets < 40) && attempts < 5000) {
    ++attempts;
    const bool conv = attempts % 2 == 0;
    const Network net = conv ? testing::random_conv_net(rng, opt) : testing::random_dense_net(rng, opt, 32);
    const ForwardResult fr = forward(net, testing::random_input(net, rng, 0.1, 1.0));
    const std::size_t k = argmax(fr.logits.values());
    const double logit = fr.logits[k];
    if (std::abs(logit) < 0.1) continue;
    if (lrp0_nets < 60) {
      MethodConfig guarded = lrp0_cfg;
      guarded.denominator_guard = 0.1;
      try {
        check_sums(attribute(net, fr.trace, k, guarded), logit);
        ++lrp0_nets;
      } catch (const GuardedDenominatorError&) {
      }
    }
    if (!conv && ab_nets < 40 && alpha_beta_bounded(net, fr.trace, k, 0.1)) {
      for (const auto& ab : {LrpAlphaBeta{2, -1}, LrpAlphaBeta{0.5, 0.5}})
        check_sums(attribute(net, fr.trace, k, MethodConfig{ab}), logit);
      ++ab_nets;
    }
  }
  Outcome o;
  o.pass = worst <= 1e-6 && lrp0_nets == 60 && ab_nets == 40;
  o.detail = "LRP0 on " + std::to_string(lrp0_nets) + " nets, alpha-beta (2,-1) and (0.5,0.5) on " +
             std::to_string(ab_nets) + " nets, worst per-layer relative error " + fmt("%.2e", worst);
  return o;
}

Outcome rlrp_robustness() {
  std::size_t finite = 0, refused = 0, cases = 0;
  auto probe = [&](const Network& net, const Tensor& x) {
    const ForwardResult fr = forward(net, x);
    for (std::size_t k = 0; k < net.num_outputs; ++k) {
      ++cases;
      if (attribute(net, fr.trace, k, rlrp_cfg).values.all_finite()) ++finite;
      try {
        attribute(net, fr.trace, k, lrp0_cfg);
      } catch (const GuardedDenominatorError&) {
        ++refused;
      }
    }
  };
  const Network zd = fixture("zero_denominator");
  probe(zd, load_image(fixtures / "constant.ppm"));

  // sweep: antisymmetric first layers against constant inputs
  std::mt19937_64 rng(1003);
  for (int i = 0; i < 30; ++i) {
    Network net = testing::random_dense_net(rng, {}, 32);
    auto& first = std::get<Dense>(net.layers[0].kind);
    const std::size_t n_in = first.weights.extent(1) & ~std::size_t{1};
    if (n_in < 2) continue;
    net.input_shape = {n_in};
    Tensor w({first.weights.extent(0), n_in});
    for (std::size_t j = 0; j < w.extent(0); ++j)
      for (std::size_t c = 0; c < n_in; c += 2) {
        w.at(j, c) = testing::uniform(rng, 0.2, 1.0);
        w.at(j, c + 1) = -w.at(j, c);
      }
    first.weights = w;
    first.bias = Tensor({w.extent(0)}, 0.5);  // keeps hidden units active
    std::get<Dense>(net.layers[2].kind).weights =
        random_tensor(std::get<Dense>(net.layers[2].kind).weights.shape(), rng, 0.2, 1.0);
    net.validate();
    probe(net, Tensor({n_in}, testing::uniform(rng, 0.1, 2.0)));
  }
  Outcome o;
  o.pass = finite == cases && refused == cases;
  o.detail = "R-LRP finite on " + std::to_string(finite) + "/" + std::to_string(cases) +
             " outputs, LRP0 raised the guarded-denominator error on " + std::to_string(refused) + "/" +
             std::to_string(cases);
  return o;
}

Outcome homogeneity() {
  std::vector<std::pair<Network, Tensor>> cases;
  std::mt19937_64 rng(1004);
  const Network det = fixture("detector");
  const auto samples = dataset_samples();
  for (std::size_t i = 0; i < 40; ++i) cases.emplace_back(det, preprocess(det, samples[i].image));
  for (const char* stem : {"conv_pool", "residual"}) {
    const Network n = fixture(stem);
    for (int i = 0; i < 5; ++i) cases.emplace_back(n, testing::random_input(n, rng));
  }
  for (int i = 0; i < 20; ++i) {
    const Network n = testing::random_conv_net(rng);
    cases.emplace_back(n, testing::random_input(n, rng));
  }
  const std::vector<MaskMode> modes{MaskMode::input_signed, MaskMode::input_abs,
                                    MaskMode::pixel_signed, MaskMode::pixel_abs};
  double worst = 0;
  std::size_t mask_mismatches = 0, masks = 0;
  for (const auto& [net, x] : cases) {
    const ForwardResult fr = forward(net, x);
    const std::size_t k = argmax(fr.logits.values());
    const auto base = attribute(net, fr.trace, k, rlrp_cfg);
    for (double c : {0.5, 2.0, 10.0}) {
      const auto m = attribute(net, fr.trace, k, rlrp_cfg, c * fr.logits[k]);
      worst = std::max(worst, rel_diff(m.values, scaled(base.values, c)));
      for (MaskMode mode : modes)
        for (double p : default_percentages()) {
          ++masks;
          if (!(make_mask(m, p, mode) == make_mask(base, p, mode))) ++mask_mismatches;
        }
    }
  }
  Outcome o;
  o.pass = worst <= 1e-12 && mask_mismatches == 0;
  o.detail = std::to_string(cases.size()) + " inputs x c in {0.5, 2, 10}: max rel diff " +
             fmt("%.2e", worst) + ", " + std::to_string(mask_mismatches) + "/" +
             std::to_string(masks) + " masks changed";
  return o;
}

Outcome pooling() {
  std::mt19937_64 rng(1005);
  std::size_t off_argmax_nonzero = 0, tie_failures = 0;
  double worst_avg = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t h = pick(rng, 2, 8), w = pick(rng, 2, 8), c = pick(rng, 1, 3);
    const std::size_t p = pick(rng, 2, 3), s = pick(rng, 1, 3);
    if (p > h || p > w) continue;
    Tensor x({h, w, c});
    for (auto& v : x.values()) v = double(rng() % 5);
    const Tensor y = max_pool2d(x, p, p, s, s);
    const Tensor z = random_tensor(y.shape(), rng, 0.5, 1.5);
    const Tensor r = backward_maxpool(MaxPool2D{p, p, s, s}, x, z, rlrp_cfg);
    const auto g = WindowGeometry::make(h, w, p, p, s, s, Padding::valid);
    std::vector<bool> on(x.size(), false);
    for (std::size_t oy = 0; oy < g.out_h; ++oy)
      for (std::size_t ox = 0; ox < g.out_w; ++ox)
        for (std::size_t ch = 0; ch < c; ++ch)
          for (std::size_t dy = 0; dy < p; ++dy)
            for (std::size_t dx = 0; dx < p; ++dx) {
              const std::size_t i = ((oy * s + dy) * w + ox * s + dx) * c + ch;
              if (x[i] == y.at(oy, ox, ch)) on[i] = true;
            }
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (!on[i] && r[i] != 0.0) ++off_argmax_nonzero;
      if (on[i] && x[i] > 0 && r[i] <= 0.0) ++tie_failures;  // every tied maximum receives flow
    }
  }
  // all-equal window: four equal shares
  const Tensor tied = backward_maxpool(MaxPool2D{2, 2, 2, 2}, Tensor({2, 2, 1}, 2.0),
                                       Tensor({1, 1, 1}, 6.0), rlrp_cfg);
  for (double v : tied.values())
    if (v != tied[0] || v == 0.0) ++tie_failures;

  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t h = pick(rng, 2, 8), w = pick(rng, 2, 8);
    const std::size_t p = pick(rng, 1, 3), s = pick(rng, 1, 3);
    if (p > h || p > w) continue;
    // R-LRP layer constants depend on the layer width, so the conv
    // comparison uses one channel; ratio rules are compared per channel.
    const std::size_t c = trial % 2 ? 1 : pick(rng, 2, 3);
    const Tensor x = random_tensor({h, w, c}, rng, 0.1, 1.0);
    const Tensor z = random_tensor(avg_pool2d(x, p, p, s, s).shape(), rng);
    const Conv2D uniform{Tensor({1, p, p, 1}, 1.0 / double(p * p)), Tensor(), s, s, Padding::valid};
    for (const MethodConfig& cfg : {rlrp_cfg, MethodConfig{LrpEpsilon{0.01}}, lrp0_cfg}) {
      if (c > 1 && std::holds_alternative<RLrp>(cfg.rule)) continue;
      const Tensor a = backward_avgpool(AvgPool2D{p, p, s, s}, x, z, cfg);
      Tensor b(x.shape());
      for (std::size_t ch = 0; ch < c; ++ch) {
        Tensor xc({h, w, 1}), zc({z.extent(0), z.extent(1), 1});
        for (std::size_t i = 0; i < h * w; ++i) xc[i] = x[i * c + ch];
        for (std::size_t i = 0; i < zc.size(); ++i) zc[i] = z[i * c + ch];
        const Tensor bc = backward_conv(uniform, xc, zc, cfg);
        for (std::size_t i = 0; i < h * w; ++i) b[i * c + ch] = bc[i];
      }
      worst_avg = std::max(worst_avg, rel_diff(a, b));
    }
  }
  Outcome o;
  o.pass = off_argmax_nonzero == 0 && tie_failures == 0 && worst_avg <= 1e-12;
  o.detail = std::to_string(off_argmax_nonzero) + " nonzero entries off the argmax set, " +
             std::to_string(tie_failures) + " tied maxima without flow, avg-pool vs uniform conv " +
             fmt("%.2e", worst_avg);
  return o;
}

Outcome residual_paths() {
  std::mt19937_64 rng(1006);
  double worst = 0;
  std::size_t checked = 0, zero_branch_failures = 0;
  for (int trial = 0; trial < 200 && checked < 100; ++trial) {
    const std::size_t c = pick(rng, 1, 3), hw = pick(rng, 2, 6);
    const bool project = trial % 2;
    const std::size_t cout = project ? pick(rng, 1, 4) : c;
    const std::size_t s = project ? 2 : 1;
    ResidualBlock block{{Conv2D{random_tensor({cout, 3, 3, c}, rng), random_tensor({cout}, rng, 0, 0.1),
                                s, s, Padding::same},
                         ReLU{},
                         Conv2D{random_tensor({cout, 3, 3, cout}, rng), random_tensor({cout}, rng, 0, 0.1),
                                1, 1, Padding::same}},
                        std::nullopt};
    if (project)
      block.projection = Conv2D{random_tensor({cout, 1, 1, c}, rng), Tensor(), 2, 2, Padding::valid};
    Network net;
    net.input_shape = {hw, hw, c};
    net.layers = {block, Flatten{}};
    const ForwardResult fr = forward(net, random_tensor({hw, hw, c}, rng, 0, 1));
    const Tensor z = random_tensor(fr.trace.layers[0].output.shape(), rng, 0.0, 1.0);
    const ResidualRelevance r = backward_residual(block, fr.trace.layers[0], z, rlrp_cfg);
    if (!r.skip_degenerate && !r.branch_degenerate) {
      const double target = z.sum();
      worst = std::max(worst, std::abs(r.skip_raw.sum() * r.skip_scale - target) / std::abs(target));
      worst = std::max(worst, std::abs(r.branch_raw.sum() * r.branch_scale - target) / std::abs(target));
      ++checked;
    }
    // same block with the branch's last convolution zeroed
    ResidualBlock zero = block;
    std::get<Conv2D>(zero.branch[2].kind).kernel = Tensor({cout, 3, 3, cout});
    std::get<Conv2D>(zero.branch[2].kind).bias = Tensor({cout});
    Network zn = net;
    zn.layers[0] = zero;
    const ForwardResult zf = forward(zn, fr.trace.layers[0].input);
    const ResidualRelevance zr = backward_residual(zero, zf.trace.layers[0], z, rlrp_cfg);
    const Tensor skip_only = scaled(zr.skip_raw, zr.skip_scale);
    if (!(zr.branch_raw == Tensor(zr.branch_raw.shape())) || !(zr.z_in == skip_only)) ++zero_branch_failures;
    if (!project && !(zr.z_in == z)) ++zero_branch_failures;
  }
  Outcome o;
  o.pass = worst <= 1e-9 && checked >= 100 && zero_branch_failures == 0;
  o.detail = std::to_string(checked) + " random blocks, worst path-sum relative error " +
             fmt("%.2e", worst) + ", " + std::to_string(zero_branch_failures) +
             " zero-branch blocks differing from the skip path";
  return o;
}

Outcome protocol() {
  const auto t0 = Clock::now();
  const Network det = fixture("detector");
  const auto samples = dataset_samples();
  EvalOptions opt;
  opt.mode = MaskMode::pixel_abs;
  opt.percentages = {10, 20, 100};
  opt.metrics = {Metric::accuracy, Metric::pointing_game};
  opt.workers = 4;
  const MethodSpec rl = MethodSpec::from(rlrp_cfg);
  const EvalReport r = evaluate(det, samples, rl, opt);
  const EvalReport rnd = accuracy_curve(det, samples, MethodSpec::random_baseline(), opt);

  // (a) unmasked accuracy: predictions against the reference labels, with and
  // without a 100% mask
  const auto ds = load_dataset(fixtures / "squares" / "dataset.json");
  std::size_t unmasked_ok = 0, full_ok = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const std::size_t label = *ds.records[i].label;
    const Tensor& img = samples[i].image;
    if (predict_class(det, preprocess(det, img)) == label) ++unmasked_ok;
    const Tensor m = make_mask(attribute(det, forward(det, preprocess(det, img)).trace,
                                         predict_class(det, preprocess(det, img)), rlrp_cfg),
                               100, opt.mode);
    if (predict_class(det, preprocess(det, apply_mask(img, m))) == label) ++full_ok;
  }
  const auto* acc100 = r.find(rl.name, "accuracy", 100);
  const bool a = acc100->value == 1.0 && acc100->n_images == samples.size() && full_ok == unmasked_ok;
  const double pointing = r.find(rl.name, "pointing_game", 10)->value;
  const double baseline = 16.0 / 256.0;
  const bool b = pointing >= 2 * baseline;
  const auto* ours = r.find(rl.name, "accuracy", 20);
  const auto* theirs = rnd.find("random", "accuracy", 20);
  const bool c = ours->value >= theirs->value && ours->n_images == theirs->n_images &&
                 ours->n_images == samples.size();
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = a && b && c && secs < 120;
  o.detail = std::string("(a) ") + (a ? "ok" : "FAIL") + " self-accuracy at 100% " +
             fmt("%.4f", acc100->value) + ", label accuracy unmasked " +
             std::to_string(unmasked_ok) + "/1000 vs 100% mask " + std::to_string(full_ok) +
             "/1000; (b) " + (b ? "ok" : "FAIL") + " pointing at 10% " + fmt("%.4f", pointing) +
             " vs 2 x " + fmt("%.4f", baseline) + "; (c) " + (c ? "ok" : "FAIL") +
             " accuracy at 20% " + fmt("%.4f", ours->value) + " vs random " +
             fmt("%.4f", theirs->value) + "; " + fmt("%.1f s", secs);
  return o;
}

Tensor brute_force_distance(const Tensor& object) {
  const std::size_t h = object.extent(0), w = object.extent(1);
  std::vector<std::pair<long, long>> pts;
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      if (object.at(y, x) != 0.0) pts.emplace_back(long(y), long(x));
  Tensor out({h, w});
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      long best = -1;
      for (const auto& [py, px] : pts) {
        const long d = (long(y) - py) * (long(y) - py) + (long(x) - px) * (long(x) - px);
        if (best < 0 || d < best) best = d;
      }
      out.at(y, x) = std::sqrt(double(best));
    }
  return out;
}

Outcome distance_metric() {
  std::size_t grids = 0, mismatches = 0;
  for (const auto& s : dataset_samples()) {
    ++grids;
    if (!(distance_transform(*s.object) == brute_force_distance(*s.object))) ++mismatches;
  }
  std::mt19937_64 rng(1007);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t h = pick(rng, 1, 64), w = pick(rng, 1, 64);
    Tensor object({h, w});
    const std::size_t per_mille = pick(rng, 1, 300);
    for (auto& v : object.values()) v = rng() % 1000 < per_mille ? 1.0 : 0.0;
    object[rng() % object.size()] = 1.0;
    ++grids;
    if (!(distance_transform(object) == brute_force_distance(object))) ++mismatches;
  }
  Tensor line({1, 3});
  line[0] = 1.0;
  Tensor sel({1, 3});
  sel[2] = 1.0;
  const bool hand = avg_distance(sel, line) == 2.0 / std::sqrt(10.0);
  Outcome o;
  o.pass = mismatches == 0 && hand;
  o.detail = std::to_string(grids) + " grids up to 64x64, " + std::to_string(mismatches) +
             " differing from brute force; 1x3 example " + (hand ? "2/sqrt(10)" : "wrong");
  return o;
}

Outcome determinism() {
  const fs::path dir = "acceptance_determinism";
  fs::create_directories(dir);
  const std::string model = (fixtures / "detector.json").string();
  const std::string blob = (fixtures / "detector.bin").string();
  const std::string dataset = (fixtures / "squares" / "dataset.json").string();
  std::vector<std::string> outputs;
  for (const char* workers : {"4", "4", "1"}) {
    const std::string out = (dir / ("run" + std::to_string(outputs.size()) + ".csv")).string();
    std::vector<std::string> args{"rlrp", "eval", "--model", model, "--blob", blob, "--dataset",
                                  dataset, "--method", "rlrp,random,lrp-eps", "--seed", "0",
                                  "--workers", workers, "--out", out};
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream so, se;
    if (run_cli(int(argv.size()), argv.data(), so, se) != 0)
      return {false, "eval exited nonzero: " + se.str()};
    outputs.push_back(read_file_text(out));
  }
  const bool same = outputs[0] == outputs[1] && outputs[1] == outputs[2];
  Outcome o;
  o.pass = same && !outputs[0].empty();
  o.detail = std::string("three eval runs (workers 4, 4, 1) ") +
             (same ? "byte-identical" : "differ") + ", " + std::to_string(outputs[0].size()) + " bytes";
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"oracle-equivalence", oracle_equivalence},
      {"conservation", conservation},
      {"rlrp-robustness", rlrp_robustness},
      {"homogeneity", homogeneity},
      {"pooling", pooling},
      {"residual-path-sums", residual_paths},
      {"protocol", protocol},
      {"distance-metric", distance_metric},
      {"determinism", determinism},
  };
  int failures = 0;
  for (const auto& [name, fn] : criteria) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
