#pragma once

#include <random>
#include <vector>

#include "periodnet/layers.hpp"
#include "periodnet/tensor.hpp"

namespace periodnet {

/**
 * Iterative grouping: a two-layer map over the variable axis that folds C
 * variable streams into G synthetic streams (regroup) and a mirror map that
 * restores C streams after the temporal mixer (ungroup).
 */
struct IgmParams {
  Linear group_hidden;    // C → h_g
  Linear group_out;       // h_g → G
  Linear ungroup_hidden;  // G → h_g
  Linear ungroup_out;     // h_g → C

  std::size_t variables() const { return group_hidden.weight.dim(0); }
  std::size_t groups() const { return group_out.weight.dim(1); }
  std::size_t hidden() const { return group_hidden.weight.dim(1); }

  static IgmParams init(std::size_t variables, std::size_t groups, std::size_t hidden, std::mt19937_64& rng);
};

/// [L, D, C] → [L, D, G]; acts identically at every (time, channel) position.
Tensor regroup(const Tensor& x, const IgmParams& params, Activation act = Activation::Relu);

/// [L, D, G] → [L, D, C].
Tensor ungroup(const Tensor& xp, const IgmParams& params, Activation act = Activation::Relu);

/// C tensors of shape L×D → one [L, D, C] tensor.
Tensor stack_streams(const std::vector<Tensor>& streams);

/// [L, D, K] → K tensors of shape L×D.
std::vector<Tensor> unstack_streams(const Tensor& x);

}  // namespace periodnet
