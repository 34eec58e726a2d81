#pragma once

// Edge-by-edge reference implementation of forward inference, LRP0 and
// R-LRP on an explicit directed acyclic graph. Slow on purpose: every
// connection is an edge and every contribution is computed per edge, so
// the vectorised engine can be checked against it on small networks.

#include <cstddef>
#include <span>
#include <vector>

#include "rlrp/network.hpp"

namespace rlrp::oracle {

enum class Activation { identity, relu };
/// Max-pool vertices take the maximum of their predecessors; their edges
/// carry the 0/1 argmax mask for propagation.
enum class Aggregation { weighted_sum, maximum };

struct Vertex {
  std::size_t layer = 0;
  double bias = 0.0;
  Activation activation = Activation::identity;
  Aggregation aggregation = Aggregation::weighted_sum;
};

struct Edge {
  std::size_t from = 0;
  std::size_t to = 0;
  double weight = 0.0;
};

class EdgeGraph {
 public:
  std::size_t add_vertex(Vertex v);
  void add_edge(std::size_t from, std::size_t to, double weight);

  const std::vector<Vertex>& vertices() const { return vertices_; }
  std::vector<Vertex>& vertices() { return vertices_; }
  const std::vector<Edge>& edges() const { return edges_; }
  const std::vector<std::size_t>& in_edges(std::size_t v) const { return in_[v]; }
  const std::vector<std::size_t>& out_edges(std::size_t v) const { return out_[v]; }

  /// Vertices without incoming / outgoing edges, in id order.
  std::vector<std::size_t> sources() const;
  std::vector<std::size_t> sinks() const;

  /// Kahn ordering. Throws DomainError if the graph has a cycle or a
  /// vertex touches no edge.
  std::vector<std::size_t> topological_order() const;

 private:
  std::vector<Vertex> vertices_;
  std::vector<Edge> edges_;
  std::vector<std::vector<std::size_t>> in_, out_;
};

inline constexpr std::size_t default_vertex_cap = 5000;

/// Expands a residual-free network into explicit vertices and edges. The
/// input fixes the max-pool argmax masks. Throws SizeError above the cap.
EdgeGraph explode(const Network& net, const Tensor& input,
                  std::size_t vertex_cap = default_vertex_cap);

/// Per-vertex outputs; sources take the input values in id order.
std::vector<double> oracle_forward(const EdgeGraph& g, const Tensor& input);

enum class OracleRule { lrp0, rlrp };

/// Contribution of every vertex to output k (the k-th vertex of the last
/// layer), seeded with that output's activation.
std::vector<double> oracle_attribute(const EdgeGraph& g, const std::vector<double>& activations,
                                     std::size_t k, OracleRule rule,
                                     double denominator_guard = 1e-9);

/// Contributions restricted to the sources, in id order.
std::vector<double> source_values(const EdgeGraph& g, const std::vector<double>& per_vertex);

/// Sum of per-vertex values grouped by layer tag.
std::vector<double> layer_sums(const EdgeGraph& g, const std::vector<double>& per_vertex);

/// max |a - b| / max |b|; 0 when both are identically zero, infinity when
/// only b is.
double max_relative_difference(std::span<const double> a, std::span<const double> b);

}  // namespace rlrp::oracle
