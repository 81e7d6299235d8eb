#include "periodnet/layers.hpp"

#include <cmath>
#include <stdexcept>

#include "periodnet/attention.hpp"
#include "periodnet/ops.hpp"

namespace periodnet {

std::string to_string(Activation act) { return act == Activation::Relu ? "relu" : "gelu"; }

Activation parse_activation(const std::string& text) {
  if (text == "relu") return Activation::Relu;
  if (text == "gelu") return Activation::Gelu;
  throw std::invalid_argument("unknown activation '" + text + "' (expected relu or gelu)");
}

Tensor activate(const Tensor& x, Activation act) { return act == Activation::Relu ? ops::relu(x) : ops::gelu(x); }

Tensor Linear::operator()(const Tensor& x) const { return ops::add_bias(ops::matmul(x, weight), bias); }

Linear Linear::init(std::size_t in, std::size_t out, std::mt19937_64& rng) {
  return {normal_init({in, out}, 1.0 / std::sqrt(static_cast<double>(in)), rng), Tensor::zeros({out}, true)};
}

Tensor LayerNormParams::operator()(const Tensor& x) const { return ops::layer_norm(x, gamma, beta); }

LayerNormParams LayerNormParams::init(std::size_t dim) {
  return {Tensor::full({dim}, 1.0, true), Tensor::zeros({dim}, true)};
}

Tensor FeedForward::operator()(const Tensor& x, Activation act) const { return down(activate(up(x), act)); }

FeedForward FeedForward::init(std::size_t d_model, std::size_t width, std::mt19937_64& rng) {
  auto up = Linear::init(d_model, width, rng);
  auto down = Linear::init(width, d_model, rng);
  return {std::move(up), std::move(down)};
}

}  // namespace periodnet
