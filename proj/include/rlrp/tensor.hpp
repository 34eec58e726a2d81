#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace rlrp {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense row-major tensor of doubles.
///
/// Every extent is at least 1 and the element count always equals the
/// product of the extents. Tensors are plain values: copying copies data.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  /// Same as the data constructor, but also rejects NaN and Inf. Use for
  /// anything coming from outside the process.
  static Tensor from_external(Shape shape, std::vector<double> data);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }
  std::size_t extent(std::size_t axis) const { return shape_.at(axis); }

  std::span<const double> values() const noexcept { return data_; }
  std::span<double> values() noexcept { return data_; }
  const std::vector<double>& data() const noexcept { return data_; }

  double operator[](std::size_t i) const { return data_[i]; }
  double& operator[](std::size_t i) { return data_[i]; }

  // Rank-specific accessors; no bounds checks beyond the flat index.
  double at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }
  double& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
  double at(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }
  double& at(std::size_t i, std::size_t j, std::size_t k) {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }
  double at(std::size_t a, std::size_t b, std::size_t c, std::size_t d) const {
    return data_[((a * shape_[1] + b) * shape_[2] + c) * shape_[3] + d];
  }
  double& at(std::size_t a, std::size_t b, std::size_t c, std::size_t d) {
    return data_[((a * shape_[1] + b) * shape_[2] + c) * shape_[3] + d];
  }

  /// Same data, new shape with the same element count.
  Tensor reshaped(Shape shape) const;

  bool all_finite() const noexcept;
  double sum() const noexcept;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

// Element-wise helpers. Shapes must match exactly.
Tensor operator+(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a, const Tensor& b);
Tensor hadamard(const Tensor& a, const Tensor& b);
Tensor scaled(const Tensor& a, double factor);
double dot(const Tensor& a, const Tensor& b);

enum class Padding { valid, same };

/// Spatial geometry of one strided 2-D window sweep (convolution or pooling).
struct WindowGeometry {
  std::size_t in_h = 0, in_w = 0;
  std::size_t k_h = 0, k_w = 0;
  std::size_t stride_h = 1, stride_w = 1;
  std::size_t pad_top = 0, pad_left = 0;
  std::size_t out_h = 0, out_w = 0;

  /// `same` pads symmetrically with the odd extra row/column on the
  /// bottom/right, output extent ceil(in / stride).
  static WindowGeometry make(std::size_t in_h, std::size_t in_w, std::size_t k_h,
                             std::size_t k_w, std::size_t stride_h, std::size_t stride_w,
                             Padding padding);
};

/// out[j] = sum_i weights[j, i] * x[i]
Tensor matvec(const Tensor& weights, const Tensor& x);
/// out[i] = sum_j weights[j, i] * y[j]
Tensor matvec_transposed(const Tensor& weights, const Tensor& y);

/// Cross-correlation of an [H, W, Cin] input with a [Cout, Kh, Kw, Cin]
/// kernel plus per-channel bias. An empty bias tensor means no bias.
Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias,
              std::size_t stride_h, std::size_t stride_w, Padding padding);

/// Adjoint of bias-free conv2d: maps an [H', W', Cout] tensor back onto the
/// [in_h, in_w, Cin] input grid.
Tensor conv2d_transpose(const Tensor& grad_like, const Tensor& kernel, std::size_t in_h,
                        std::size_t in_w, std::size_t stride_h, std::size_t stride_w,
                        Padding padding);

/// Per-channel window maximum / mean over valid (unpadded) windows.
Tensor max_pool2d(const Tensor& input, std::size_t pool_h, std::size_t pool_w,
                  std::size_t stride_h, std::size_t stride_w);
Tensor avg_pool2d(const Tensor& input, std::size_t pool_h, std::size_t pool_w,
                  std::size_t stride_h, std::size_t stride_w);

enum class Ordering { signed_value, absolute };

/// Indices of the ceil(fraction * N) largest entries, returned in ascending
/// index order. Ties are resolved in favour of the lower flat index.
std::vector<std::size_t> top_fraction_indices(std::span<const double> values, double fraction,
                                              Ordering ordering);

/// Number of entries selected for a fraction of n. Guards against
/// 0.15 * 100 landing a hair above 15.
std::size_t selection_count(double fraction, std::size_t n);

}  // namespace rlrp
