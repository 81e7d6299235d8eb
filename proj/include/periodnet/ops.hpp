#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "periodnet/tensor.hpp"

// Gradient-tracked primitives. Every op validates shapes, records its
// backward closure when any input requires grad, and rejects non-finite
// results.
namespace periodnet::ops {

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);

/// x[m×n] + b[n], broadcast over rows.
Tensor add_bias(const Tensor& x, const Tensor& bias);

Tensor relu(const Tensor& x);
/// tanh approximation.
Tensor gelu(const Tensor& x);

/// Row-wise softmax over the last axis of a 2-D tensor, max-subtracted.
Tensor softmax_rows(const Tensor& x);

/// Normalizes over the last axis (population variance) then applies gamma/beta.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);

Tensor reshape(const Tensor& x, Shape shape);
Tensor concat(std::span<const Tensor> parts, std::size_t axis);
Tensor concat(std::initializer_list<Tensor> parts, std::size_t axis);
/// Half-open range [begin, end) along `axis`.
Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin, std::size_t end);
/// Row gather for 2-D tensors; repeated indices accumulate gradient.
Tensor gather_rows(const Tensor& x, std::span<const std::size_t> rows);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

}  // namespace periodnet::ops
