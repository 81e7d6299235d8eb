#pragma once

#include <random>
#include <string>

#include "periodnet/tensor.hpp"

namespace periodnet {

enum class Activation { Relu, Gelu };

std::string to_string(Activation act);
Activation parse_activation(const std::string& text);
Tensor activate(const Tensor& x, Activation act);

/// y = x·W + b for x of shape [m × in].
struct Linear {
  Tensor weight;  // in×out
  Tensor bias;    // out

  Tensor operator()(const Tensor& x) const;

  /// Weights ~ N(0, 1/in), bias zero.
  static Linear init(std::size_t in, std::size_t out, std::mt19937_64& rng);
};

struct LayerNormParams {
  Tensor gamma;
  Tensor beta;

  Tensor operator()(const Tensor& x) const;
  static LayerNormParams init(std::size_t dim);
};

/// Point-wise two-layer MLP over the channel axis.
struct FeedForward {
  Linear up;
  Linear down;

  Tensor operator()(const Tensor& x, Activation act) const;
  static FeedForward init(std::size_t d_model, std::size_t width, std::mt19937_64& rng);
};

}  // namespace periodnet
