#include "rlrp/network.hpp"

#include <algorithm>

#include "rlrp/errors.hpp"

namespace rlrp {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

Shape require_image(const Shape& in, const char* what) {
  if (in.size() != 3)
    throw ModelShapeError(std::string(what) + " needs an [H,W,C] input, got " + shape_string(in));
  return in;
}

Shape window_output(const Shape& in, std::size_t k_h, std::size_t k_w, std::size_t s_h,
                    std::size_t s_w, Padding padding, std::size_t channels, const char* what) {
  require_image(in, what);
  try {
    const auto g = WindowGeometry::make(in[0], in[1], k_h, k_w, s_h, s_w, padding);
    return {g.out_h, g.out_w, channels};
  } catch (const DimensionError& e) {
    throw ModelShapeError(std::string(what) + ": " + e.what());
  }
}

Shape conv_output(const Conv2D& c, const Shape& in) {
  require_image(in, "conv2d");
  if (c.kernel.rank() != 4)
    throw ModelShapeError("conv2d kernel must be [Cout,Kh,Kw,Cin], got " +
                          shape_string(c.kernel.shape()));
  if (c.kernel.extent(3) != in[2])
    throw ModelShapeError("conv2d kernel has " + std::to_string(c.kernel.extent(3)) +
                          " input channels, layer input has " + std::to_string(in[2]));
  if (!c.bias.empty() && c.bias.shape() != Shape{c.kernel.extent(0)})
    throw ModelShapeError("conv2d bias " + shape_string(c.bias.shape()) + " for " +
                          std::to_string(c.kernel.extent(0)) + " output channels");
  return window_output(in, c.kernel.extent(1), c.kernel.extent(2), c.stride_h, c.stride_w,
                       c.padding, c.kernel.extent(0), "conv2d");
}

void check_projection(const Conv2D& p) {
  const bool bias_free =
      p.bias.empty() || std::all_of(p.bias.values().begin(), p.bias.values().end(),
                                    [](double v) { return v == 0.0; });
  if (p.kernel.rank() != 4 || p.kernel.extent(1) != 1 || p.kernel.extent(2) != 1 ||
      p.stride_h != 2 || p.stride_w != 2 || !bias_free)
    throw ModelShapeError("residual projection must be a bias-free 1x1 convolution with stride 2");
}

}  // namespace

std::string Layer::name() const {
  return std::visit(Overloaded{[](const Dense&) { return std::string("dense"); },
                               [](const Conv2D&) { return std::string("conv2d"); },
                               [](const MaxPool2D&) { return std::string("maxpool2d"); },
                               [](const AvgPool2D&) { return std::string("avgpool2d"); },
                               [](const Flatten&) { return std::string("flatten"); },
                               [](const ReLU&) { return std::string("relu"); },
                               [](const ResidualBlock&) { return std::string("residual"); }},
                    kind);
}

Shape infer_shape(const Layer& layer, const Shape& in) {
  return std::visit(
      Overloaded{
          [&](const Dense& d) -> Shape {
            if (d.weights.rank() != 2)
              throw ModelShapeError("dense weights must be [Nout,Nin], got " +
                                    shape_string(d.weights.shape()));
            if (in.size() != 1 || in[0] != d.weights.extent(1))
              throw ModelShapeError("dense expects input [" + std::to_string(d.weights.extent(1)) +
                                    "], got " + shape_string(in));
            if (d.bias.shape() != Shape{d.weights.extent(0)})
              throw ModelShapeError("dense bias " + shape_string(d.bias.shape()) + " for " +
                                    std::to_string(d.weights.extent(0)) + " outputs");
            return {d.weights.extent(0)};
          },
          [&](const Conv2D& c) { return conv_output(c, in); },
          [&](const MaxPool2D& p) {
            return window_output(in, p.pool_h, p.pool_w, p.stride_h, p.stride_w, Padding::valid,
                                 in.size() == 3 ? in[2] : 0, "maxpool2d");
          },
          [&](const AvgPool2D& p) {
            return window_output(in, p.pool_h, p.pool_w, p.stride_h, p.stride_w, Padding::valid,
                                 in.size() == 3 ? in[2] : 0, "avgpool2d");
          },
          [&](const Flatten&) { return Shape{shape_size(in)}; },
          [&](const ReLU&) { return in; },
          [&](const ResidualBlock& b) {
            Shape branch = in;
            for (const auto& l : b.branch) branch = infer_shape(l, branch);
            Shape skip = in;
            if (b.projection) {
              check_projection(*b.projection);
              skip = conv_output(*b.projection, in);
            }
            if (branch != skip)
              throw ModelShapeError("residual branch output " + shape_string(branch) +
                                    " differs from skip output " + shape_string(skip));
            return branch;
          }},
      layer.kind);
}

Shape Network::validate() const {
  if (input_shape.empty() || shape_size(input_shape) == 0)
    throw ModelShapeError("network input shape is empty");
  Shape s = input_shape;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    try {
      s = infer_shape(layers[i], s);
    } catch (const ModelShapeError& e) {
      throw ModelShapeError("layer " + std::to_string(i) + " (" + layers[i].name() +
                            "): " + e.what());
    }
  }
  if (s != Shape{num_outputs})
    throw ModelShapeError("network output " + shape_string(s) + " does not match num_outputs " +
                          std::to_string(num_outputs));
  if (preprocessing.mode == PreprocessMode::centered &&
      (input_shape.size() != 3 || preprocessing.channel_means.size() != input_shape[2]))
    throw ModelShapeError("centered preprocessing needs one mean per input channel");
  return s;
}

Tensor preprocess(const Network& net, const Tensor& raw_image) {
  if (raw_image.shape() != net.input_shape)
    throw DimensionError("image shape " + shape_string(raw_image.shape()) +
                         " does not match network input " + shape_string(net.input_shape));
  if (net.preprocessing.mode == PreprocessMode::unit) return raw_image;
  Tensor out = raw_image;
  const std::size_t c = net.input_shape[2];
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = out[i] * 255.0 - net.preprocessing.channel_means[i % c];
  return out;
}

namespace {

Tensor apply_layer(const Layer& layer, const Tensor& x, LayerTrace& trace, std::size_t index);

Tensor run_layers(const std::vector<Layer>& layers, Tensor x, std::vector<LayerTrace>& traces,
                  std::size_t first_index) {
  traces.resize(layers.size());
  for (std::size_t i = 0; i < layers.size(); ++i) {
    traces[i].input = x;
    x = apply_layer(layers[i], x, traces[i], first_index);
    if (!x.all_finite())
      throw NumericError("forward", first_index + i, "non-finite activation in " + layers[i].name());
    traces[i].output = x;
  }
  return x;
}

Tensor apply_layer(const Layer& layer, const Tensor& x, LayerTrace& trace, std::size_t index) {
  return std::visit(
      Overloaded{
          [&](const Dense& d) {
            if (x.rank() != 1)
              throw DimensionError("dense layer got input " + shape_string(x.shape()));
            return matvec(d.weights, x) + d.bias;
          },
          [&](const Conv2D& c) {
            return conv2d(x, c.kernel, c.bias, c.stride_h, c.stride_w, c.padding);
          },
          [&](const MaxPool2D& p) {
            return max_pool2d(x, p.pool_h, p.pool_w, p.stride_h, p.stride_w);
          },
          [&](const AvgPool2D& p) {
            return avg_pool2d(x, p.pool_h, p.pool_w, p.stride_h, p.stride_w);
          },
          [&](const Flatten&) { return x.reshaped({x.size()}); },
          [&](const ReLU&) {
            Tensor y = x;
            for (auto& v : y.values()) v = v > 0.0 ? v : 0.0;
            return y;
          },
          [&](const ResidualBlock& b) {
            trace.branch_output = run_layers(b.branch, x, trace.branch, index);
            trace.skip_output =
                b.projection ? conv2d(x, b.projection->kernel, Tensor{}, b.projection->stride_h,
                                      b.projection->stride_w, b.projection->padding)
                             : x;
            return trace.branch_output + trace.skip_output;
          }},
      layer.kind);
}

}  // namespace

ForwardResult forward(const Network& net, const Tensor& input) {
  if (input.shape() != net.input_shape)
    throw DimensionError("input shape " + shape_string(input.shape()) +
                         " does not match network input " + shape_string(net.input_shape));
  ForwardResult result;
  result.logits = run_layers(net.layers, input, result.trace.layers, 0);
  return result;
}

Tensor forward_logits(const Network& net, const Tensor& input) {
  return forward(net, input).logits;
}

std::size_t argmax(std::span<const double> values) {
  if (values.empty()) throw DomainError("argmax of an empty range");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = i;
  return best;
}

std::size_t predict_class(const Network& net, const Tensor& input) {
  return argmax(forward_logits(net, input).values());
}

}  // namespace rlrp
