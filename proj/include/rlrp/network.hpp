#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "rlrp/tensor.hpp"

namespace rlrp {

struct Dense {
  Tensor weights;  // [Nout, Nin]
  Tensor bias;     // [Nout]
};

struct Conv2D {
  Tensor kernel;  // [Cout, Kh, Kw, Cin]
  Tensor bias;    // [Cout]; empty tensor means bias-free
  std::size_t stride_h = 1, stride_w = 1;
  Padding padding = Padding::valid;
};

struct MaxPool2D {
  std::size_t pool_h = 2, pool_w = 2;
  std::size_t stride_h = 2, stride_w = 2;
};

struct AvgPool2D {
  std::size_t pool_h = 2, pool_w = 2;
  std::size_t stride_h = 2, stride_w = 2;
};

struct Flatten {};
struct ReLU {};

struct Layer;

/// y = branch(x) + skip(x). The skip path is the identity unless a
/// projection is given; projections are bias-free 1x1 stride-2 convolutions.
struct ResidualBlock {
  std::vector<Layer> branch;
  std::optional<Conv2D> projection;
};

struct Layer {
  using Kind = std::variant<Dense, Conv2D, MaxPool2D, AvgPool2D, Flatten, ReLU, ResidualBlock>;
  Kind kind;

  template <typename T>
    requires(!std::is_same_v<std::remove_cvref_t<T>, Layer>)
  Layer(T value) : kind(std::move(value)) {}  // NOLINT(google-explicit-constructor)

  std::string name() const;
};

enum class PreprocessMode { unit, centered };

/// How a raw [0, 1] image is mapped to network input.
///
/// `unit` feeds the image as is. `centered` rescales to [0, 255] and
/// subtracts one mean per channel.
struct Preprocessing {
  PreprocessMode mode = PreprocessMode::unit;
  std::vector<double> channel_means;
};

struct Network {
  std::string name;
  Shape input_shape;
  std::size_t num_outputs = 0;
  std::vector<Layer> layers;
  std::vector<std::string> class_labels;
  Preprocessing preprocessing;

  /// Walks the layer list, checks every shape invariant and returns the
  /// output shape. Throws ModelShapeError on the first inconsistency.
  Shape validate() const;
};

/// Output shape of one layer for a given input shape; throws ModelShapeError.
Shape infer_shape(const Layer& layer, const Shape& in);

Tensor preprocess(const Network& net, const Tensor& raw_image);

/// Activations recorded for one layer. Residual blocks also keep the
/// traces of their branch layers and of the skip path.
struct LayerTrace {
  Tensor input;
  Tensor output;
  std::vector<LayerTrace> branch;
  Tensor branch_output;
  Tensor skip_output;
};

struct ForwardTrace {
  std::vector<LayerTrace> layers;
};

struct ForwardResult {
  Tensor logits;
  ForwardTrace trace;
};

/// Runs the network on an already preprocessed input. Throws NumericError
/// naming the layer when an activation is not finite.
ForwardResult forward(const Network& net, const Tensor& input);

Tensor forward_logits(const Network& net, const Tensor& input);

/// Index of the largest value; ties go to the lowest index.
std::size_t argmax(std::span<const double> values);

std::size_t predict_class(const Network& net, const Tensor& input);

}  // namespace rlrp
