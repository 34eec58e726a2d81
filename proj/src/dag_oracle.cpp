#include "rlrp/dag_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

#include "rlrp/errors.hpp"

namespace rlrp::oracle {

std::size_t EdgeGraph::add_vertex(Vertex v) {
  vertices_.push_back(v);
  in_.emplace_back();
  out_.emplace_back();
  return vertices_.size() - 1;
}

void EdgeGraph::add_edge(std::size_t from, std::size_t to, double weight) {
  if (from >= vertices_.size() || to >= vertices_.size())
    throw DomainError("edge endpoint out of range");
  edges_.push_back({from, to, weight});
  out_[from].push_back(edges_.size() - 1);
  in_[to].push_back(edges_.size() - 1);
}

std::vector<std::size_t> EdgeGraph::sources() const {
  std::vector<std::size_t> s;
  for (std::size_t v = 0; v < vertices_.size(); ++v)
    if (in_[v].empty()) s.push_back(v);
  return s;
}

std::vector<std::size_t> EdgeGraph::sinks() const {
  std::vector<std::size_t> s;
  for (std::size_t v = 0; v < vertices_.size(); ++v)
    if (out_[v].empty()) s.push_back(v);
  return s;
}

std::vector<std::size_t> EdgeGraph::topological_order() const {
  const std::size_t n = vertices_.size();
  std::vector<std::size_t> indegree(n);
  std::deque<std::size_t> ready;
  for (std::size_t v = 0; v < n; ++v) {
    if (in_[v].empty() && out_[v].empty())
      throw DomainError("vertex " + std::to_string(v) + " is not on any edge");
    indegree[v] = in_[v].size();
    if (indegree[v] == 0) ready.push_back(v);
  }
  std::vector<std::size_t> order;
  order.reserve(n);
  while (!ready.empty()) {
    const std::size_t v = ready.front();
    ready.pop_front();
    order.push_back(v);
    for (auto e : out_[v])
      if (--indegree[edges_[e].to] == 0) ready.push_back(edges_[e].to);
  }
  if (order.size() != n) throw DomainError("graph contains a cycle");
  return order;
}

namespace {

struct Grid {
  std::vector<std::size_t> ids;  // row-major over the current shape
  std::vector<double> values;    // literal activations, used for max-pool masks
  Shape shape;
  std::size_t layer = 0;
};

struct Window {
  std::size_t out_h, out_w;
  std::ptrdiff_t off_h, off_w;  // input row/col of the window origin for output 0
};

Window window_of(std::size_t in_h, std::size_t in_w, std::size_t k_h, std::size_t k_w,
                 std::size_t s_h, std::size_t s_w, Padding padding) {
  if (padding == Padding::valid) {
    if (k_h > in_h || k_w > in_w) throw DomainError("oracle: window larger than input");
    return {(in_h - k_h) / s_h + 1, (in_w - k_w) / s_w + 1, 0, 0};
  }
  const std::size_t out_h = (in_h + s_h - 1) / s_h, out_w = (in_w + s_w - 1) / s_w;
  const auto pad_h = std::max<std::ptrdiff_t>(0, std::ptrdiff_t((out_h - 1) * s_h + k_h) - std::ptrdiff_t(in_h));
  const auto pad_w = std::max<std::ptrdiff_t>(0, std::ptrdiff_t((out_w - 1) * s_w + k_w) - std::ptrdiff_t(in_w));
  return {out_h, out_w, -(pad_h / 2), -(pad_w / 2)};
}

class Builder {
 public:
  Builder(const Tensor& input, std::size_t cap) : cap_(cap) {
    grid_.shape = input.shape();
    reserve(input.size());
    for (std::size_t i = 0; i < input.size(); ++i) {
      grid_.ids.push_back(g_.add_vertex({0}));
      grid_.values.push_back(input[i]);
    }
  }

  void dense(const Dense& d) {
    if (grid_.shape.size() != 1 || grid_.shape[0] != d.weights.extent(1))
      throw DomainError("oracle: dense layer input mismatch");
    const std::size_t n_out = d.weights.extent(0), n_in = d.weights.extent(1);
    Grid next = begin(Shape{n_out});
    for (std::size_t j = 0; j < n_out; ++j) {
      const std::size_t v = g_.add_vertex({next.layer, d.bias[j]});
      next.ids.push_back(v);
      double acc = d.bias[j];
      for (std::size_t i = 0; i < n_in; ++i) {
        g_.add_edge(grid_.ids[i], v, d.weights.at(j, i));
        acc += d.weights.at(j, i) * grid_.values[i];
      }
      next.values.push_back(acc);
    }
    grid_ = std::move(next);
  }

  void conv(const Conv2D& c) {
    require_image();
    const std::size_t in_h = grid_.shape[0], in_w = grid_.shape[1], c_in = grid_.shape[2];
    const std::size_t c_out = c.kernel.extent(0), k_h = c.kernel.extent(1), k_w = c.kernel.extent(2);
    if (c.kernel.extent(3) != c_in) throw DomainError("oracle: conv channel mismatch");
    const Window w = window_of(in_h, in_w, k_h, k_w, c.stride_h, c.stride_w, c.padding);
    Grid next = begin(Shape{w.out_h, w.out_w, c_out});
    for (std::size_t oh = 0; oh < w.out_h; ++oh)
      for (std::size_t ow = 0; ow < w.out_w; ++ow)
        for (std::size_t co = 0; co < c_out; ++co) {
          const double b = c.bias.empty() ? 0.0 : c.bias[co];
          const std::size_t v = g_.add_vertex({next.layer, b});
          next.ids.push_back(v);
          double acc = b;
          for (std::size_t p = 0; p < k_h; ++p)
            for (std::size_t q = 0; q < k_w; ++q) {
              const std::ptrdiff_t ih = w.off_h + std::ptrdiff_t(oh * c.stride_h + p);
              const std::ptrdiff_t iw = w.off_w + std::ptrdiff_t(ow * c.stride_w + q);
              if (ih < 0 || iw < 0 || ih >= std::ptrdiff_t(in_h) || iw >= std::ptrdiff_t(in_w))
                continue;
              for (std::size_t ci = 0; ci < c_in; ++ci) {
                const std::size_t src = (std::size_t(ih) * in_w + std::size_t(iw)) * c_in + ci;
                const double weight = c.kernel.at(co, p, q, ci);
                g_.add_edge(grid_.ids[src], v, weight);
                acc += weight * grid_.values[src];
              }
            }
          next.values.push_back(acc);
        }
    grid_ = std::move(next);
  }

  void pool(std::size_t ph, std::size_t pw, std::size_t sh, std::size_t sw, bool maximum) {
    require_image();
    const std::size_t in_h = grid_.shape[0], in_w = grid_.shape[1], ch = grid_.shape[2];
    const Window w = window_of(in_h, in_w, ph, pw, sh, sw, Padding::valid);
    Grid next = begin(Shape{w.out_h, w.out_w, ch});
    for (std::size_t oh = 0; oh < w.out_h; ++oh)
      for (std::size_t ow = 0; ow < w.out_w; ++ow)
        for (std::size_t c = 0; c < ch; ++c) {
          std::vector<std::size_t> window;
          for (std::size_t p = 0; p < ph; ++p)
            for (std::size_t q = 0; q < pw; ++q)
              window.push_back(((oh * sh + p) * in_w + (ow * sw + q)) * ch + c);
          Vertex vx{next.layer};
          if (maximum) vx.aggregation = Aggregation::maximum;
          const std::size_t v = g_.add_vertex(vx);
          next.ids.push_back(v);
          double best = grid_.values[window.front()];
          double mean = 0.0;
          for (auto src : window) {
            best = std::max(best, grid_.values[src]);
            mean += grid_.values[src] / double(ph * pw);
          }
          for (auto src : window) {
            const double weight =
                maximum ? (grid_.values[src] == best ? 1.0 : 0.0) : 1.0 / double(ph * pw);
            g_.add_edge(grid_.ids[src], v, weight);
          }
          next.values.push_back(maximum ? best : mean);
        }
    grid_ = std::move(next);
  }

  void flatten() { grid_.shape = Shape{grid_.ids.size()}; }

  void relu() {
    if (grid_.layer == 0) throw DomainError("oracle: ReLU directly on the network input");
    for (std::size_t i = 0; i < grid_.ids.size(); ++i) {
      g_.vertices()[grid_.ids[i]].activation = Activation::relu;
      grid_.values[i] = std::max(0.0, grid_.values[i]);
    }
  }

  EdgeGraph take() { return std::move(g_); }

 private:
  void require_image() const {
    if (grid_.shape.size() != 3) throw DomainError("oracle: layer needs an [H,W,C] input");
  }

  void reserve(std::size_t extra) {
    count_ += extra;
    if (count_ > cap_)
      throw SizeError("oracle: network needs more than " + std::to_string(cap_) + " vertices");
  }

  Grid begin(Shape shape) {
    reserve(shape_size(shape));
    Grid next;
    next.shape = std::move(shape);
    next.layer = grid_.layer + 1;
    return next;
  }

  EdgeGraph g_;
  Grid grid_;
  std::size_t cap_;
  std::size_t count_ = 0;
};

}  // namespace

EdgeGraph explode(const Network& net, const Tensor& input, std::size_t vertex_cap) {
  if (input.shape() != net.input_shape) throw DimensionError("oracle: input shape mismatch");
  Builder b(input, vertex_cap);
  for (const auto& layer : net.layers) {
    if (const auto* d = std::get_if<Dense>(&layer.kind)) b.dense(*d);
    else if (const auto* c = std::get_if<Conv2D>(&layer.kind)) b.conv(*c);
    else if (const auto* m = std::get_if<MaxPool2D>(&layer.kind))
      b.pool(m->pool_h, m->pool_w, m->stride_h, m->stride_w, true);
    else if (const auto* a = std::get_if<AvgPool2D>(&layer.kind))
      b.pool(a->pool_h, a->pool_w, a->stride_h, a->stride_w, false);
    else if (std::holds_alternative<Flatten>(layer.kind)) b.flatten();
    else if (std::holds_alternative<ReLU>(layer.kind)) b.relu();
    else throw DomainError("oracle: residual blocks are not expanded");
  }
  EdgeGraph g = b.take();
  g.topological_order();
  return g;
}

std::vector<double> oracle_forward(const EdgeGraph& g, const Tensor& input) {
  const auto order = g.topological_order();
  const auto src = g.sources();
  if (src.size() != input.size()) throw DimensionError("oracle: input size mismatch");
  std::vector<double> x(g.vertices().size(), 0.0);
  for (std::size_t i = 0; i < src.size(); ++i) x[src[i]] = input[i];
  for (auto v : order) {
    const auto& in = g.in_edges(v);
    if (in.empty()) continue;
    const Vertex& vx = g.vertices()[v];
    double value;
    if (vx.aggregation == Aggregation::maximum) {
      value = x[g.edges()[in.front()].from];
      for (auto e : in) value = std::max(value, x[g.edges()[e].from]);
    } else {
      value = vx.bias;
      for (auto e : in) value += g.edges()[e].weight * x[g.edges()[e].from];
    }
    if (vx.activation == Activation::relu) value = std::max(0.0, value);
    x[v] = value;
  }
  return x;
}

std::vector<double> oracle_attribute(const EdgeGraph& g, const std::vector<double>& activations,
                                     std::size_t k, OracleRule rule, double denominator_guard) {
  const auto order = g.topological_order();
  const auto& vs = g.vertices();
  if (activations.size() != vs.size()) throw DimensionError("oracle: activation count mismatch");

  std::size_t last_layer = 0;
  for (const auto& v : vs) last_layer = std::max(last_layer, v.layer);
  std::vector<std::size_t> layer_size(last_layer + 1, 0);
  std::vector<std::size_t> outputs;
  for (std::size_t v = 0; v < vs.size(); ++v) {
    ++layer_size[vs[v].layer];
    if (vs[v].layer == last_layer) outputs.push_back(v);
  }
  if (k >= outputs.size()) throw DomainError("oracle: output index out of range");

  std::vector<double> z(vs.size(), 0.0);
  z[outputs[k]] = activations[outputs[k]];

  // LRP0 denominators: sum over incoming edges of w * x, bias excluded.
  std::vector<double> denominator(vs.size(), 0.0);
  for (std::size_t v = 0; v < vs.size(); ++v)
    for (auto e : g.in_edges(v)) denominator[v] += g.edges()[e].weight * activations[g.edges()[e].from];

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const std::size_t i = *it;
    const auto& out = g.out_edges(i);
    if (out.empty()) continue;
    double total = 0.0;
    if (rule == OracleRule::rlrp) {
      // z_ijk = w_ij x_i z_jk / M_j ;  z_ik = Card(J) / N_(l+1) * sum_J z_ijk
      std::size_t next_layer = vs[g.edges()[out.front()].to].layer;
      for (auto e : out) {
        const Edge& edge = g.edges()[e];
        const double m_j = double(g.in_edges(edge.to).size());
        total += edge.weight * activations[i] * z[edge.to] / m_j;
      }
      total *= double(out.size()) / double(layer_size[next_layer]);
    } else {
      for (auto e : out) {
        const Edge& edge = g.edges()[e];
        if (z[edge.to] == 0.0) continue;
        const double den = denominator[edge.to];
        if (!(std::abs(den) >= denominator_guard))
          throw GuardedDenominatorError("oracle lrp0", vs[edge.to].layer,
                                        "guarded denominator at vertex " + std::to_string(edge.to));
        total += edge.weight * activations[i] / den * z[edge.to];
      }
    }
    z[i] = total;
  }
  return z;
}

std::vector<double> source_values(const EdgeGraph& g, const std::vector<double>& per_vertex) {
  std::vector<double> out;
  for (auto v : g.sources()) out.push_back(per_vertex.at(v));
  return out;
}

std::vector<double> layer_sums(const EdgeGraph& g, const std::vector<double>& per_vertex) {
  std::vector<double> sums;
  for (std::size_t v = 0; v < g.vertices().size(); ++v) {
    const std::size_t l = g.vertices()[v].layer;
    if (sums.size() <= l) sums.resize(l + 1, 0.0);
    sums[l] += per_vertex.at(v);
  }
  return sums;
}

double max_relative_difference(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("compared vectors differ in length");
  double diff = 0, scale = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff = std::max(diff, std::abs(a[i] - b[i]));
    scale = std::max(scale, std::abs(b[i]));
  }
  if (scale == 0) return diff == 0 ? 0.0 : std::numeric_limits<double>::infinity();
  return diff / scale;
}

}  // namespace rlrp::oracle
