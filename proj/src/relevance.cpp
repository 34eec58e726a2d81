#include "rlrp/relevance.hpp"

#include <cmath>
#include <memory>
#include <sstream>

#include "rlrp/errors.hpp"

namespace rlrp {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::string format_number(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

// Which part of the weights a linear map should use. LRP-alpha-beta needs
// the positive and negative parts separately, LRP-gamma needs w + gamma*w+.
enum class WeightPart { all, positive, negative, gamma_boost };

struct WeightTransform {
  WeightPart part = WeightPart::all;
  double gamma = 0.0;

  double operator()(double w) const {
    switch (part) {
      case WeightPart::all: return w;
      case WeightPart::positive: return w > 0.0 ? w : 0.0;
      case WeightPart::negative: return w < 0.0 ? w : 0.0;
      case WeightPart::gamma_boost: return w + gamma * (w > 0.0 ? w : 0.0);
    }
    return w;
  }
};

Tensor transformed(const Tensor& w, const WeightTransform& t) {
  if (t.part == WeightPart::all) return w;
  Tensor out = w;
  for (auto& v : out.values()) v = t(v);
  return out;
}

/// A bias-free linear layer seen as a bipartite graph: forward product,
/// adjoint, and the connectivity counts the R-LRP constants are built from.
class LinearMap {
 public:
  virtual ~LinearMap() = default;
  virtual Tensor apply(const Tensor& x, const WeightTransform& t) const = 0;
  virtual Tensor adjoint(const Tensor& y, const WeightTransform& t) const = 0;
  /// Output-shaped: number of inputs connected to each output.
  virtual Tensor fan_in() const = 0;
  /// Input-shaped: number of outputs each input is connected to.
  virtual Tensor fan_out() const = 0;
};

class DenseMap final : public LinearMap {
 public:
  explicit DenseMap(const Tensor& weights) : weights_(weights) {}

  Tensor apply(const Tensor& x, const WeightTransform& t) const override {
    return matvec(transformed(weights_, t), x);
  }
  Tensor adjoint(const Tensor& y, const WeightTransform& t) const override {
    return matvec_transposed(transformed(weights_, t), y);
  }
  Tensor fan_in() const override {
    return Tensor({weights_.extent(0)}, double(weights_.extent(1)));
  }
  Tensor fan_out() const override {
    return Tensor({weights_.extent(1)}, double(weights_.extent(0)));
  }

 private:
  const Tensor& weights_;
};

class ConvMap final : public LinearMap {
 public:
  ConvMap(const Tensor& kernel, std::size_t stride_h, std::size_t stride_w, Padding padding,
          std::size_t in_h, std::size_t in_w)
      : kernel_(kernel),
        stride_h_(stride_h),
        stride_w_(stride_w),
        padding_(padding),
        geom_(WindowGeometry::make(in_h, in_w, kernel.extent(1), kernel.extent(2), stride_h,
                                   stride_w, padding)) {}

  Tensor apply(const Tensor& x, const WeightTransform& t) const override {
    return conv2d(x, transformed(kernel_, t), Tensor{}, stride_h_, stride_w_, padding_);
  }
  Tensor adjoint(const Tensor& y, const WeightTransform& t) const override {
    return conv2d_transpose(y, transformed(kernel_, t), geom_.in_h, geom_.in_w, stride_h_,
                            stride_w_, padding_);
  }

  // Padding cells are not neurons: windows hanging over the border have a
  // smaller fan-in and border inputs sit under fewer windows.
  Tensor fan_in() const override {
    const std::size_t c_out = kernel_.extent(0), c_in = kernel_.extent(3);
    Tensor out({geom_.out_h, geom_.out_w, c_out});
    for (std::size_t oh = 0; oh < geom_.out_h; ++oh)
      for (std::size_t ow = 0; ow < geom_.out_w; ++ow) {
        std::size_t count = 0;
        for_each_tap(oh, ow, [&](std::size_t, std::size_t) { ++count; });
        for (std::size_t co = 0; co < c_out; ++co) out.at(oh, ow, co) = double(count * c_in);
      }
    return out;
  }
  Tensor fan_out() const override {
    const std::size_t c_out = kernel_.extent(0), c_in = kernel_.extent(3);
    std::vector<std::size_t> windows(geom_.in_h * geom_.in_w, 0);
    for (std::size_t oh = 0; oh < geom_.out_h; ++oh)
      for (std::size_t ow = 0; ow < geom_.out_w; ++ow)
        for_each_tap(oh, ow, [&](std::size_t ih, std::size_t iw) { ++windows[ih * geom_.in_w + iw]; });
    Tensor out({geom_.in_h, geom_.in_w, c_in});
    for (std::size_t ih = 0; ih < geom_.in_h; ++ih)
      for (std::size_t iw = 0; iw < geom_.in_w; ++iw)
        for (std::size_t ci = 0; ci < c_in; ++ci)
          out.at(ih, iw, ci) = double(windows[ih * geom_.in_w + iw] * c_out);
    return out;
  }

 private:
  template <typename F>
  void for_each_tap(std::size_t oh, std::size_t ow, F&& f) const {
    for (std::size_t p = 0; p < geom_.k_h; ++p) {
      const auto ih = std::ptrdiff_t(oh * geom_.stride_h + p) - std::ptrdiff_t(geom_.pad_top);
      if (ih < 0 || ih >= std::ptrdiff_t(geom_.in_h)) continue;
      for (std::size_t q = 0; q < geom_.k_w; ++q) {
        const auto iw = std::ptrdiff_t(ow * geom_.stride_w + q) - std::ptrdiff_t(geom_.pad_left);
        if (iw < 0 || iw >= std::ptrdiff_t(geom_.in_w)) continue;
        f(std::size_t(ih), std::size_t(iw));
      }
    }
  }

  const Tensor& kernel_;
  std::size_t stride_h_, stride_w_;
  Padding padding_;
  WindowGeometry geom_;
};

/// Depthwise window map: every output (oh, ow, c) reads its window on
/// channel c only, with one weight per window position. Average pooling
/// uses a uniform 1/(P1*P2) filter, max pooling the 0/1 argmax mask.
class PoolMap final : public LinearMap {
 public:
  static PoolMap average(const Shape& in, std::size_t ph, std::size_t pw, std::size_t sh,
                         std::size_t sw) {
    PoolMap m(in, ph, pw, sh, sw);
    m.weights_.assign(m.out_count() * ph * pw, 1.0 / double(ph * pw));
    return m;
  }

  static PoolMap maximum(const Tensor& x_in, std::size_t ph, std::size_t pw, std::size_t sh,
                         std::size_t sw) {
    PoolMap m(x_in.shape(), ph, pw, sh, sw);
    m.weights_.assign(m.out_count() * ph * pw, 0.0);
    for (std::size_t o = 0; o < m.out_count(); ++o) {
      double best = -INFINITY;
      m.for_each_tap(o, [&](std::size_t, std::size_t in) { best = std::max(best, x_in[in]); });
      m.for_each_tap(o, [&](std::size_t tap, std::size_t in) {
        if (x_in[in] == best) m.weights_[o * ph * pw + tap] = 1.0;
      });
    }
    return m;
  }

  Tensor apply(const Tensor& x, const WeightTransform& t) const override {
    Tensor out({geom_.out_h, geom_.out_w, channels_});
    for (std::size_t o = 0; o < out_count(); ++o) {
      double acc = 0.0;
      for_each_tap(o, [&](std::size_t tap, std::size_t in) { acc += t(weight(o, tap)) * x[in]; });
      out[o] = acc;
    }
    return out;
  }
  Tensor adjoint(const Tensor& y, const WeightTransform& t) const override {
    Tensor out({geom_.in_h, geom_.in_w, channels_});
    for (std::size_t o = 0; o < out_count(); ++o) {
      if (y[o] == 0.0) continue;
      for_each_tap(o, [&](std::size_t tap, std::size_t in) { out[in] += t(weight(o, tap)) * y[o]; });
    }
    return out;
  }
  Tensor fan_in() const override {
    return Tensor({geom_.out_h, geom_.out_w, channels_}, double(geom_.k_h * geom_.k_w));
  }
  Tensor fan_out() const override {
    Tensor out({geom_.in_h, geom_.in_w, channels_});
    for (std::size_t o = 0; o < out_count(); ++o)
      for_each_tap(o, [&](std::size_t, std::size_t in) { out[in] += 1.0; });
    return out;
  }

 private:
  PoolMap(const Shape& in, std::size_t ph, std::size_t pw, std::size_t sh, std::size_t sw) {
    if (in.size() != 3) throw DimensionError("pooling needs an [H,W,C] input");
    geom_ = WindowGeometry::make(in[0], in[1], ph, pw, sh, sw, Padding::valid);
    channels_ = in[2];
  }

  std::size_t out_count() const { return geom_.out_h * geom_.out_w * channels_; }
  double weight(std::size_t o, std::size_t tap) const {
    return weights_[o * geom_.k_h * geom_.k_w + tap];
  }

  template <typename F>
  void for_each_tap(std::size_t o, F&& f) const {
    const std::size_t c = o % channels_;
    const std::size_t ow = (o / channels_) % geom_.out_w;
    const std::size_t oh = o / (channels_ * geom_.out_w);
    for (std::size_t p = 0; p < geom_.k_h; ++p)
      for (std::size_t q = 0; q < geom_.k_w; ++q) {
        const std::size_t ih = oh * geom_.stride_h + p, iw = ow * geom_.stride_w + q;
        f(p * geom_.k_w + q, (ih * geom_.in_w + iw) * channels_ + c);
      }
  }

  WindowGeometry geom_;
  std::size_t channels_ = 0;
  std::vector<double> weights_;
};

/// y = a + b over two equally shaped operands, stored as one flat input
/// [a..., b...]. Lets the ratio rules split relevance at a residual sum.
class SumMap final : public LinearMap {
 public:
  explicit SumMap(std::size_t n) : n_(n) {}

  Tensor apply(const Tensor& x, const WeightTransform& t) const override {
    const double w = t(1.0);
    Tensor out({n_});
    for (std::size_t i = 0; i < n_; ++i) out[i] = w * x[i] + w * x[n_ + i];
    return out;
  }
  Tensor adjoint(const Tensor& y, const WeightTransform& t) const override {
    const double w = t(1.0);
    Tensor out({2 * n_});
    for (std::size_t i = 0; i < n_; ++i) out[i] = out[n_ + i] = w * y[i];
    return out;
  }
  Tensor fan_in() const override { return Tensor({n_}, 2.0); }
  Tensor fan_out() const override { return Tensor({2 * n_}, 1.0); }

 private:
  std::size_t n_;
};

std::string rule_name(const MethodConfig& cfg) {
  return std::visit(Overloaded{[](const Lrp0&) { return std::string("lrp0"); },
                               [](const LrpEpsilon&) { return std::string("lrp-eps"); },
                               [](const LrpGamma&) { return std::string("lrp-gamma"); },
                               [](const LrpAlphaBeta&) { return std::string("lrp-ab"); },
                               [](const RLrp&) { return std::string("rlrp"); }},
                    cfg.rule);
}

// z_in[i] = x[i] * sum_j w'[j,i] * z_out[j] / (den[j] + eps), den = sum_k w'[j,k] x[k]
Tensor ratio_rule(const LinearMap& map, const Tensor& x, const Tensor& z_out,
                  const WeightTransform& t, double eps, bool guarded, const MethodConfig& cfg,
                  std::size_t layer) {
  Tensor den = map.apply(x, t);
  Tensor s(z_out.shape());
  for (std::size_t j = 0; j < s.size(); ++j) {
    if (z_out[j] == 0.0) continue;
    const double d = den[j] + eps;
    if (guarded && !(std::abs(d) >= cfg.denominator_guard))
      throw GuardedDenominatorError(
          "relevance " + rule_name(cfg), layer,
          "guarded denominator: |sum w x| = " + format_number(std::abs(d)) +
              " below guard " + format_number(cfg.denominator_guard) + " at neuron " +
              std::to_string(j));
    s[j] = z_out[j] / d;
  }
  return hadamard(x, map.adjoint(s, t));
}

Tensor alpha_beta_rule(const LinearMap& map, const Tensor& x, const Tensor& z_out,
                       const LrpAlphaBeta& ab) {
  Tensor x_pos = x, x_neg = x;
  for (auto& v : x_pos.values()) v = v > 0.0 ? v : 0.0;
  for (auto& v : x_neg.values()) v = v < 0.0 ? v : 0.0;
  const WeightTransform pos{WeightPart::positive}, neg{WeightPart::negative};

  // (w x)+ = w+ x+ + w- x-,  (w x)- = w- x+ + w+ x-
  const Tensor den_pos = map.apply(x_pos, pos) + map.apply(x_neg, neg);
  const Tensor den_neg = map.apply(x_pos, neg) + map.apply(x_neg, pos);
  Tensor s_pos(z_out.shape()), s_neg(z_out.shape());
  for (std::size_t j = 0; j < z_out.size(); ++j) {
    // An empty half has only zero numerators and passes nothing on.
    if (den_pos[j] != 0.0) s_pos[j] = ab.alpha * z_out[j] / den_pos[j];
    if (den_neg[j] != 0.0) s_neg[j] = ab.beta * z_out[j] / den_neg[j];
  }
  return hadamard(x_pos, map.adjoint(s_pos, pos) + map.adjoint(s_neg, neg)) +
         hadamard(x_neg, map.adjoint(s_pos, neg) + map.adjoint(s_neg, pos));
}

// z_in[i] = Card(J_i) / N_out * x[i] * sum_{j in J_i} w[j,i] * z_out[j] / M_j
Tensor relative_rule(const LinearMap& map, const Tensor& x, const Tensor& z_out) {
  const Tensor fan_in = map.fan_in();
  Tensor s = z_out;
  for (std::size_t j = 0; j < s.size(); ++j) s[j] /= fan_in[j];
  const Tensor back = map.adjoint(s, WeightTransform{});
  const Tensor fan_out = map.fan_out();
  const double n_out = double(z_out.size());
  Tensor z_in(x.shape());
  for (std::size_t i = 0; i < z_in.size(); ++i) z_in[i] = fan_out[i] / n_out * x[i] * back[i];
  return z_in;
}

Tensor propagate(const LinearMap& map, const Tensor& x, const Tensor& z_out,
                 const MethodConfig& cfg, std::size_t layer) {
  Tensor z_in = std::visit(
      Overloaded{
          [&](const Lrp0&) { return ratio_rule(map, x, z_out, {}, 0.0, true, cfg, layer); },
          [&](const LrpEpsilon& e) {
            return ratio_rule(map, x, z_out, {}, e.epsilon, false, cfg, layer);
          },
          [&](const LrpGamma& g) {
            return ratio_rule(map, x, z_out, {WeightPart::gamma_boost, g.gamma}, 0.0, true, cfg,
                              layer);
          },
          [&](const LrpAlphaBeta& ab) { return alpha_beta_rule(map, x, z_out, ab); },
          [&](const RLrp&) { return relative_rule(map, x, z_out); }},
      cfg.rule);
  if (!z_in.all_finite())
    throw NumericError("relevance " + rule_name(cfg), layer, "non-finite contribution");
  return z_in;
}

void require_shape(const Tensor& t, const Shape& expected, const char* what) {
  if (t.shape() != expected)
    throw DimensionError(std::string(what) + ": got " + shape_string(t.shape()) + ", expected " +
                         shape_string(expected));
}

struct Recorder {
  std::vector<LayerSum>* sums = nullptr;
  std::vector<std::string>* diagnostics = nullptr;
};

Tensor backward_layers(const std::vector<Layer>& layers, const std::vector<LayerTrace>& traces,
                       Tensor z, const MethodConfig& cfg, std::optional<std::size_t> block_index,
                       const Recorder& rec);

Tensor backward_layer(const Layer& layer, const LayerTrace& trace, const Tensor& z,
                      const MethodConfig& cfg, std::size_t index, const Recorder& rec) {
  return std::visit(
      Overloaded{
          [&](const Dense& d) { return backward_dense(d, trace.input, z, cfg, index); },
          [&](const Conv2D& c) { return backward_conv(c, trace.input, z, cfg, index); },
          [&](const MaxPool2D& p) { return backward_maxpool(p, trace.input, z, cfg, index); },
          [&](const AvgPool2D& p) { return backward_avgpool(p, trace.input, z, cfg, index); },
          [&](const Flatten&) { return z.reshaped(trace.input.shape()); },
          [&](const ReLU&) { return z; },
          [&](const ResidualBlock& b) {
            auto r = backward_residual(b, trace, z, cfg, index);
            if (rec.sums) {
              rec.sums->push_back({index, "skip_raw", r.skip_raw.sum()});
              rec.sums->push_back({index, "branch_raw", r.branch_raw.sum()});
              rec.sums->push_back({index, "skip_scaled", r.skip_scale * r.skip_raw.sum()});
              rec.sums->push_back({index, "branch_scaled", r.branch_scale * r.branch_raw.sum()});
            }
            if (rec.diagnostics) {
              if (r.skip_degenerate)
                rec.diagnostics->push_back("layer " + std::to_string(index) +
                                           ": skip path input-side sum degenerate, left unscaled");
              if (r.branch_degenerate)
                rec.diagnostics->push_back(
                    "layer " + std::to_string(index) +
                    ": branch path input-side sum degenerate, left unscaled");
            }
            return std::move(r.z_in);
          }},
      layer.kind);
}

Tensor backward_layers(const std::vector<Layer>& layers, const std::vector<LayerTrace>& traces,
                       Tensor z, const MethodConfig& cfg, std::optional<std::size_t> block_index,
                       const Recorder& rec) {
  if (traces.size() != layers.size())
    throw DimensionError("trace has " + std::to_string(traces.size()) + " entries for " +
                         std::to_string(layers.size()) + " layers");
  for (std::size_t i = layers.size(); i-- > 0;) {
    const std::size_t index = block_index.value_or(i);
    require_shape(z, traces[i].output.shape(), "relevance at layer output");
    z = backward_layer(layers[i], traces[i], z, cfg, index, block_index ? Recorder{} : rec);
    if (!z.all_finite())
      throw NumericError("relevance " + rule_name(cfg), index, "non-finite contribution");
    if (!block_index && rec.sums) rec.sums->push_back({i, "input", z.sum()});
  }
  return z;
}

Tensor flat(const Tensor& t) { return t.reshaped({t.size()}); }

}  // namespace

void MethodConfig::validate() const {
  if (!(denominator_guard >= 0.0) || !std::isfinite(denominator_guard))
    throw DomainError("denominator guard must be a finite non-negative number");
  std::visit(Overloaded{[](const Lrp0&) {}, [](const RLrp&) {},
                        [](const LrpEpsilon& e) {
                          if (!(e.epsilon > 0.0) || !std::isfinite(e.epsilon))
                            throw DomainError("LRP-epsilon needs epsilon > 0");
                        },
                        [](const LrpGamma& g) {
                          if (!(g.gamma >= 0.0) || !std::isfinite(g.gamma))
                            throw DomainError("LRP-gamma needs gamma >= 0");
                        },
                        [](const LrpAlphaBeta& ab) {
                          if (!std::isfinite(ab.alpha) || !std::isfinite(ab.beta))
                            throw DomainError("LRP-alpha-beta needs finite alpha and beta");
                        }},
             rule);
}

std::string MethodConfig::label() const {
  return std::visit(
      Overloaded{[](const Lrp0&) { return std::string("lrp0"); },
                 [](const RLrp&) { return std::string("rlrp"); },
                 [](const LrpEpsilon& e) { return "lrp-eps(" + format_number(e.epsilon) + ")"; },
                 [](const LrpGamma& g) { return "lrp-gamma(" + format_number(g.gamma) + ")"; },
                 [](const LrpAlphaBeta& ab) {
                   return "lrp-ab(" + format_number(ab.alpha) + "," + format_number(ab.beta) + ")";
                 }},
      rule);
}

bool is_rlrp(const MethodConfig& cfg) { return std::holds_alternative<RLrp>(cfg.rule); }

Tensor backward_dense(const Dense& layer, const Tensor& x_in, const Tensor& z_out,
                      const MethodConfig& cfg, std::size_t layer_index) {
  require_shape(x_in, {layer.weights.extent(1)}, "dense input");
  require_shape(z_out, {layer.weights.extent(0)}, "dense relevance");
  return propagate(DenseMap(layer.weights), x_in, z_out, cfg, layer_index);
}

Tensor backward_conv(const Conv2D& layer, const Tensor& x_in, const Tensor& z_out,
                     const MethodConfig& cfg, std::size_t layer_index) {
  if (x_in.rank() != 3) throw DimensionError("conv input must be [H,W,C]");
  const ConvMap map(layer.kernel, layer.stride_h, layer.stride_w, layer.padding, x_in.extent(0),
                    x_in.extent(1));
  const auto g = WindowGeometry::make(x_in.extent(0), x_in.extent(1), layer.kernel.extent(1),
                                      layer.kernel.extent(2), layer.stride_h, layer.stride_w,
                                      layer.padding);
  require_shape(z_out, {g.out_h, g.out_w, layer.kernel.extent(0)}, "conv relevance");
  return propagate(map, x_in, z_out, cfg, layer_index);
}

Tensor backward_maxpool(const MaxPool2D& layer, const Tensor& x_in, const Tensor& z_out,
                        const MethodConfig& cfg, std::size_t layer_index) {
  const auto map = PoolMap::maximum(x_in, layer.pool_h, layer.pool_w, layer.stride_h, layer.stride_w);
  require_shape(z_out, map.fan_in().shape(), "maxpool relevance");
  return propagate(map, x_in, z_out, cfg, layer_index);
}

Tensor backward_avgpool(const AvgPool2D& layer, const Tensor& x_in, const Tensor& z_out,
                        const MethodConfig& cfg, std::size_t layer_index) {
  const auto map =
      PoolMap::average(x_in.shape(), layer.pool_h, layer.pool_w, layer.stride_h, layer.stride_w);
  require_shape(z_out, map.fan_in().shape(), "avgpool relevance");
  return propagate(map, x_in, z_out, cfg, layer_index);
}

ResidualRelevance backward_residual(const ResidualBlock& block, const LayerTrace& trace,
                                    const Tensor& z_out, const MethodConfig& cfg,
                                    std::size_t layer_index) {
  require_shape(z_out, trace.output.shape(), "residual relevance");
  ResidualRelevance r;
  const Tensor& x = trace.input;

  auto skip_backward = [&](const Tensor& z) {
    return block.projection ? backward_conv(*block.projection, x, z, cfg, layer_index) : z;
  };

  if (is_rlrp(cfg)) {
    r.branch_raw = backward_layers(block.branch, trace.branch, z_out, cfg, layer_index, {});
    r.skip_raw = skip_backward(z_out);
    r.skip_output_sum = r.branch_output_sum = z_out.sum();

    const double out_sum = z_out.sum();
    auto scale_for = [&](const Tensor& raw, bool& degenerate) {
      const double in_sum = raw.sum();
      if (std::abs(in_sum) < cfg.denominator_guard * std::max(1.0, std::abs(out_sum))) {
        degenerate = true;
        return 1.0;
      }
      return out_sum / in_sum;
    };
    r.skip_scale = scale_for(r.skip_raw, r.skip_degenerate);
    r.branch_scale = scale_for(r.branch_raw, r.branch_degenerate);
    r.z_in = scaled(r.skip_raw, r.skip_scale) + scaled(r.branch_raw, r.branch_scale);
  } else {
    const std::size_t n = z_out.size();
    Tensor operands({2 * n});
    for (std::size_t i = 0; i < n; ++i) {
      operands[i] = trace.branch_output[i];
      operands[n + i] = trace.skip_output[i];
    }
    const Tensor split = propagate(SumMap(n), operands, flat(z_out), cfg, layer_index);
    Tensor z_branch(z_out.shape()), z_skip(z_out.shape());
    for (std::size_t i = 0; i < n; ++i) {
      z_branch[i] = split[i];
      z_skip[i] = split[n + i];
    }
    r.branch_output_sum = z_branch.sum();
    r.skip_output_sum = z_skip.sum();
    r.branch_raw = backward_layers(block.branch, trace.branch, z_branch, cfg, layer_index, {});
    r.skip_raw = skip_backward(z_skip);
    r.z_in = r.skip_raw + r.branch_raw;
  }
  if (!r.z_in.all_finite())
    throw NumericError("relevance " + rule_name(cfg), layer_index, "non-finite contribution");
  return r;
}

ContributionMap attribute(const Network& net, const ForwardTrace& trace, std::size_t k,
                          const MethodConfig& cfg, std::optional<double> seed_value) {
  cfg.validate();
  if (k >= net.num_outputs)
    throw DomainError("class index " + std::to_string(k) + " out of range for " +
                      std::to_string(net.num_outputs) + " outputs");
  if (trace.layers.size() != net.layers.size())
    throw DimensionError("trace does not belong to this network");
  if (trace.layers.empty()) throw DimensionError("cannot attribute through an empty network");
  const Tensor& logits = trace.layers.back().output;

  ContributionMap map;
  map.selected_output = k;
  map.method = cfg;
  Tensor seed(logits.shape());
  seed[k] = seed_value.value_or(logits[k]);
  map.per_layer_sums.push_back({net.layers.size(), "output", seed[k]});

  const Recorder rec{&map.per_layer_sums, &map.diagnostics};
  map.values = backward_layers(net.layers, trace.layers, std::move(seed), cfg, std::nullopt, rec);
  return map;
}

Tensor pixel_contributions(const Tensor& values, bool absolute) {
  if (values.rank() != 3)
    throw DomainError("pixel contributions need an [H,W,C] map, got " +
                      shape_string(values.shape()));
  const std::size_t h = values.extent(0), w = values.extent(1), c = values.extent(2);
  Tensor out({h, w});
  for (std::size_t i = 0; i < h; ++i)
    for (std::size_t j = 0; j < w; ++j) {
      double acc = 0.0;
      for (std::size_t ch = 0; ch < c; ++ch) acc += values.at(i, j, ch);
      out.at(i, j) = absolute ? std::abs(acc) : acc;
    }
  return out;
}

Tensor pixel_contributions(const ContributionMap& map, bool absolute) {
  return pixel_contributions(map.values, absolute);
}

}  // namespace rlrp
