#include "rlrp/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include "rlrp/errors.hpp"

namespace rlrp {

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

namespace {

void check_extents(const Shape& shape) {
  if (shape.empty()) throw DimensionError("tensor shape must have at least one axis");
  for (auto e : shape)
    if (e == 0) throw DimensionError("tensor extent of 0 in shape " + shape_string(shape));
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw DimensionError(std::string(op) + ": shape " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
}

}  // namespace

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  check_extents(shape_);
  data_.assign(shape_size(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  check_extents(shape_);
  if (shape_size(shape_) != data_.size())
    throw DimensionError("shape " + shape_string(shape_) + " needs " +
                         std::to_string(shape_size(shape_)) + " values, got " +
                         std::to_string(data_.size()));
}

Tensor Tensor::from_external(Shape shape, std::vector<double> data) {
  Tensor t(std::move(shape), std::move(data));
  if (!t.all_finite()) throw DomainError("non-finite value in external tensor data");
  return t;
}

Tensor Tensor::reshaped(Shape shape) const { return Tensor(std::move(shape), data_); }

bool Tensor::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

double Tensor::sum() const noexcept { return std::accumulate(data_.begin(), data_.end(), 0.0); }

Tensor operator+(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
  return out;
}

Tensor operator-(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "subtract");
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b[i];
  return out;
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "hadamard");
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b[i];
  return out;
}

Tensor scaled(const Tensor& a, double factor) {
  Tensor out = a;
  for (auto& v : out.values()) v *= factor;
  return out;
}

double dot(const Tensor& a, const Tensor& b) {
  if (a.size() != b.size()) throw DimensionError("dot: element counts differ");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

WindowGeometry WindowGeometry::make(std::size_t in_h, std::size_t in_w, std::size_t k_h,
                                    std::size_t k_w, std::size_t stride_h, std::size_t stride_w,
                                    Padding padding) {
  if (stride_h == 0 || stride_w == 0) throw DimensionError("strides must be >= 1");
  if (k_h == 0 || k_w == 0) throw DimensionError("window extents must be >= 1");
  WindowGeometry g;
  g.in_h = in_h;
  g.in_w = in_w;
  g.k_h = k_h;
  g.k_w = k_w;
  g.stride_h = stride_h;
  g.stride_w = stride_w;
  if (padding == Padding::valid) {
    if (k_h > in_h || k_w > in_w)
      throw DimensionError("window " + std::to_string(k_h) + "x" + std::to_string(k_w) +
                           " larger than input " + std::to_string(in_h) + "x" +
                           std::to_string(in_w));
    g.out_h = (in_h - k_h) / stride_h + 1;
    g.out_w = (in_w - k_w) / stride_w + 1;
  } else {
    g.out_h = (in_h + stride_h - 1) / stride_h;
    g.out_w = (in_w + stride_w - 1) / stride_w;
    const std::size_t need_h = (g.out_h - 1) * stride_h + k_h;
    const std::size_t need_w = (g.out_w - 1) * stride_w + k_w;
    const std::size_t total_h = need_h > in_h ? need_h - in_h : 0;
    const std::size_t total_w = need_w > in_w ? need_w - in_w : 0;
    g.pad_top = total_h / 2;
    g.pad_left = total_w / 2;
  }
  return g;
}

Tensor matvec(const Tensor& weights, const Tensor& x) {
  if (weights.rank() != 2 || x.rank() != 1 || weights.extent(1) != x.extent(0))
    throw DimensionError("matvec: weights " + shape_string(weights.shape()) + " vs input " +
                         shape_string(x.shape()));
  const std::size_t n_out = weights.extent(0), n_in = weights.extent(1);
  Tensor out({n_out});
  for (std::size_t j = 0; j < n_out; ++j) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n_in; ++i) acc += weights.at(j, i) * x[i];
    out[j] = acc;
  }
  return out;
}

Tensor matvec_transposed(const Tensor& weights, const Tensor& y) {
  if (weights.rank() != 2 || y.rank() != 1 || weights.extent(0) != y.extent(0))
    throw DimensionError("matvec_transposed: weights " + shape_string(weights.shape()) +
                         " vs input " + shape_string(y.shape()));
  const std::size_t n_out = weights.extent(0), n_in = weights.extent(1);
  Tensor out({n_in});
  for (std::size_t j = 0; j < n_out; ++j) {
    const double yj = y[j];
    if (yj == 0.0) continue;
    for (std::size_t i = 0; i < n_in; ++i) out[i] += weights.at(j, i) * yj;
  }
  return out;
}

namespace {

void check_kernel(const Tensor& kernel, std::size_t c_in, const char* op) {
  if (kernel.rank() != 4)
    throw DimensionError(std::string(op) + ": kernel must be [Cout,Kh,Kw,Cin], got " +
                         shape_string(kernel.shape()));
  if (kernel.extent(3) != c_in)
    throw DimensionError(std::string(op) + ": kernel expects " +
                         std::to_string(kernel.extent(3)) + " input channels, got " +
                         std::to_string(c_in));
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias,
              std::size_t stride_h, std::size_t stride_w, Padding padding) {
  if (input.rank() != 3)
    throw DimensionError("conv2d: input must be [H,W,C], got " + shape_string(input.shape()));
  const std::size_t c_in = input.extent(2);
  check_kernel(kernel, c_in, "conv2d");
  const std::size_t c_out = kernel.extent(0);
  if (!bias.empty() && (bias.rank() != 1 || bias.extent(0) != c_out))
    throw DimensionError("conv2d: bias " + shape_string(bias.shape()) + " for " +
                         std::to_string(c_out) + " output channels");
  const auto g = WindowGeometry::make(input.extent(0), input.extent(1), kernel.extent(1),
                                      kernel.extent(2), stride_h, stride_w, padding);

  Tensor out({g.out_h, g.out_w, c_out});
  for (std::size_t oh = 0; oh < g.out_h; ++oh) {
    for (std::size_t ow = 0; ow < g.out_w; ++ow) {
      for (std::size_t co = 0; co < c_out; ++co) {
        double acc = bias.empty() ? 0.0 : bias[co];
        for (std::size_t p = 0; p < g.k_h; ++p) {
          const std::ptrdiff_t ih = std::ptrdiff_t(oh * g.stride_h + p) - std::ptrdiff_t(g.pad_top);
          if (ih < 0 || ih >= std::ptrdiff_t(g.in_h)) continue;
          for (std::size_t q = 0; q < g.k_w; ++q) {
            const std::ptrdiff_t iw =
                std::ptrdiff_t(ow * g.stride_w + q) - std::ptrdiff_t(g.pad_left);
            if (iw < 0 || iw >= std::ptrdiff_t(g.in_w)) continue;
            for (std::size_t ci = 0; ci < c_in; ++ci)
              acc += kernel.at(co, p, q, ci) * input.at(std::size_t(ih), std::size_t(iw), ci);
          }
        }
        out.at(oh, ow, co) = acc;
      }
    }
  }
  return out;
}

Tensor conv2d_transpose(const Tensor& grad_like, const Tensor& kernel, std::size_t in_h,
                        std::size_t in_w, std::size_t stride_h, std::size_t stride_w,
                        Padding padding) {
  if (grad_like.rank() != 3)
    throw DimensionError("conv2d_transpose: input must be [H',W',Cout], got " +
                         shape_string(grad_like.shape()));
  if (kernel.rank() != 4)
    throw DimensionError("conv2d_transpose: kernel must be [Cout,Kh,Kw,Cin], got " +
                         shape_string(kernel.shape()));
  const std::size_t c_out = kernel.extent(0), c_in = kernel.extent(3);
  const auto g = WindowGeometry::make(in_h, in_w, kernel.extent(1), kernel.extent(2), stride_h,
                                      stride_w, padding);
  if (grad_like.extent(0) != g.out_h || grad_like.extent(1) != g.out_w ||
      grad_like.extent(2) != c_out)
    throw DimensionError("conv2d_transpose: " + shape_string(grad_like.shape()) +
                         " does not match forward output " +
                         shape_string({g.out_h, g.out_w, c_out}));

  Tensor out({in_h, in_w, c_in});
  for (std::size_t oh = 0; oh < g.out_h; ++oh) {
    for (std::size_t ow = 0; ow < g.out_w; ++ow) {
      for (std::size_t co = 0; co < c_out; ++co) {
        const double y = grad_like.at(oh, ow, co);
        if (y == 0.0) continue;
        for (std::size_t p = 0; p < g.k_h; ++p) {
          const std::ptrdiff_t ih = std::ptrdiff_t(oh * g.stride_h + p) - std::ptrdiff_t(g.pad_top);
          if (ih < 0 || ih >= std::ptrdiff_t(g.in_h)) continue;
          for (std::size_t q = 0; q < g.k_w; ++q) {
            const std::ptrdiff_t iw =
                std::ptrdiff_t(ow * g.stride_w + q) - std::ptrdiff_t(g.pad_left);
            if (iw < 0 || iw >= std::ptrdiff_t(g.in_w)) continue;
            for (std::size_t ci = 0; ci < c_in; ++ci)
              out.at(std::size_t(ih), std::size_t(iw), ci) += kernel.at(co, p, q, ci) * y;
          }
        }
      }
    }
  }
  return out;
}

namespace {

template <typename Reduce>
Tensor pool2d(const Tensor& input, std::size_t pool_h, std::size_t pool_w, std::size_t stride_h,
              std::size_t stride_w, Reduce reduce) {
  if (input.rank() != 3)
    throw DimensionError("pool2d: input must be [H,W,C], got " + shape_string(input.shape()));
  const auto g = WindowGeometry::make(input.extent(0), input.extent(1), pool_h, pool_w,
                                      stride_h, stride_w, Padding::valid);
  const std::size_t c = input.extent(2);
  Tensor out({g.out_h, g.out_w, c});
  std::vector<double> window(pool_h * pool_w);
  for (std::size_t oh = 0; oh < g.out_h; ++oh)
    for (std::size_t ow = 0; ow < g.out_w; ++ow)
      for (std::size_t ch = 0; ch < c; ++ch) {
        for (std::size_t p = 0; p < pool_h; ++p)
          for (std::size_t q = 0; q < pool_w; ++q)
            window[p * pool_w + q] = input.at(oh * stride_h + p, ow * stride_w + q, ch);
        out.at(oh, ow, ch) = reduce(window);
      }
  return out;
}

}  // namespace

Tensor max_pool2d(const Tensor& input, std::size_t pool_h, std::size_t pool_w,
                  std::size_t stride_h, std::size_t stride_w) {
  return pool2d(input, pool_h, pool_w, stride_h, stride_w,
                [](const std::vector<double>& w) { return *std::max_element(w.begin(), w.end()); });
}

Tensor avg_pool2d(const Tensor& input, std::size_t pool_h, std::size_t pool_w,
                  std::size_t stride_h, std::size_t stride_w) {
  const double inv = 1.0 / double(pool_h * pool_w);
  return pool2d(input, pool_h, pool_w, stride_h, stride_w, [inv](const std::vector<double>& w) {
    double acc = 0.0;
    for (double v : w) acc += v;
    return acc * inv;
  });
}

std::size_t selection_count(double fraction, std::size_t n) {
  const double raw = fraction * double(n);
  auto count = std::size_t(std::ceil(raw - 1e-9 * std::max(1.0, raw)));
  return std::clamp<std::size_t>(count, 1, n);
}

std::vector<std::size_t> top_fraction_indices(std::span<const double> values, double fraction,
                                              Ordering ordering) {
  if (values.empty()) throw DomainError("top_fraction_indices: empty tensor");
  if (!(fraction > 0.0 && fraction <= 1.0))
    throw DomainError("top_fraction_indices: fraction must lie in (0, 1]");
  const std::size_t n = values.size();
  const std::size_t count = selection_count(fraction, n);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto key = [&](std::size_t i) {
    return ordering == Ordering::absolute ? std::abs(values[i]) : values[i];
  };
  auto before = [&](std::size_t a, std::size_t b) {
    const double ka = key(a), kb = key(b);
    if (ka != kb) return ka > kb;
    return a < b;
  };
  if (count < n) std::nth_element(order.begin(), order.begin() + std::ptrdiff_t(count), order.end(), before);
  order.resize(count);
  std::sort(order.begin(), order.end());
  return order;
}

}  // namespace rlrp
