#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "rlrp/network.hpp"
#include "rlrp/tensor.hpp"

namespace rlrp {

struct Lrp0 {};
struct LrpEpsilon {
  double epsilon = 0.01;
};
struct LrpGamma {
  double gamma = 0.25;
};
/// Positive and negative parts weighted by alpha and beta; relevance is
/// conserved when alpha + beta == 1 (e.g. alpha = 2, beta = -1).
struct LrpAlphaBeta {
  double alpha = 0.5;
  double beta = 0.5;
};
/// Relative LRP: weight * activation * downstream contribution scaled by
/// fixed per-layer connectivity constants, with no data-dependent division.
struct RLrp {};

using Rule = std::variant<Lrp0, LrpEpsilon, LrpGamma, LrpAlphaBeta, RLrp>;

struct MethodConfig {
  Rule rule = RLrp{};
  /// LRP0 and LRP-gamma refuse denominators with a smaller magnitude. Also
  /// the degeneracy threshold for residual path sums.
  double denominator_guard = 1e-9;

  /// Throws DomainError for epsilon <= 0, gamma < 0, negative guard or
  /// non-finite hyperparameters.
  void validate() const;
  /// Short identifier such as "rlrp" or "lrp-eps(0.01)".
  std::string label() const;
};

bool is_rlrp(const MethodConfig& cfg);

struct LayerSum {
  std::size_t layer = 0;
  /// "output" for the seed, "input" for the contribution entering a layer,
  /// and skip_raw / branch_raw / skip_scaled / branch_scaled inside
  /// residual blocks.
  std::string tag;
  double sum = 0.0;
};

struct ContributionMap {
  Tensor values;  // shaped like the network input
  std::size_t selected_output = 0;
  MethodConfig method;
  std::vector<LayerSum> per_layer_sums;
  std::vector<std::string> diagnostics;
};

/// Seeds output k with its logit (or with `seed_value` when given) and
/// propagates contributions back to the input.
ContributionMap attribute(const Network& net, const ForwardTrace& trace, std::size_t k,
                          const MethodConfig& cfg, std::optional<double> seed_value = {});

// Single-layer rules. `layer_index` only labels errors.

Tensor backward_dense(const Dense& layer, const Tensor& x_in, const Tensor& z_out,
                      const MethodConfig& cfg, std::size_t layer_index = 0);
Tensor backward_conv(const Conv2D& layer, const Tensor& x_in, const Tensor& z_out,
                     const MethodConfig& cfg, std::size_t layer_index = 0);
/// Relevance reaches only the positions attaining each window maximum;
/// tied maxima all receive it.
Tensor backward_maxpool(const MaxPool2D& layer, const Tensor& x_in, const Tensor& z_out,
                        const MethodConfig& cfg, std::size_t layer_index = 0);
Tensor backward_avgpool(const AvgPool2D& layer, const Tensor& x_in, const Tensor& z_out,
                        const MethodConfig& cfg, std::size_t layer_index = 0);

struct ResidualRelevance {
  Tensor z_in;
  Tensor skip_raw;    // skip path contribution at the block input, unscaled
  Tensor branch_raw;  // branch path contribution at the block input, unscaled
  double skip_scale = 1.0;
  double branch_scale = 1.0;
  bool skip_degenerate = false;
  bool branch_degenerate = false;
  double skip_output_sum = 0.0;
  double branch_output_sum = 0.0;
};

/// Under R-LRP both paths are seeded with z_out and each is rescaled so its
/// input-side sum matches its output-side sum before the two are added. A
/// path whose input-side sum is too small to divide by is left unscaled.
/// Other rules split z_out over the two summands of the addition with the
/// rule's own formula.
ResidualRelevance backward_residual(const ResidualBlock& block, const LayerTrace& trace,
                                    const Tensor& z_out, const MethodConfig& cfg,
                                    std::size_t layer_index = 0);

/// Per-pixel sum over the channel axis of an [H, W, C] map; `absolute`
/// takes the magnitude after summing.
Tensor pixel_contributions(const Tensor& values, bool absolute = false);
Tensor pixel_contributions(const ContributionMap& map, bool absolute = false);

}  // namespace rlrp
