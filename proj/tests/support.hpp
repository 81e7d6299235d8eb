#pragma once

#include <algorithm>
#include <cmath>
#include <cstring>
#include <random>

#include "periodnet/tensor.hpp"

namespace testing {

using periodnet::Shape;
using periodnet::Tensor;

inline Tensor random_tensor(Shape shape, std::mt19937_64& rng, double scale = 1.0, bool requires_grad = false) {
  std::normal_distribution<double> normal(0.0, scale);
  std::vector<double> v(periodnet::shape_numel(shape));
  for (auto& x : v) x = normal(rng);
  return Tensor::from(std::move(shape), std::move(v), requires_grad);
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) return INFINITY;
  double m = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline bool bit_equal(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() && std::memcmp(a.data().data(), b.data().data(), a.numel() * sizeof(double)) == 0;
}

/// Copy of `t` with entry `i` shifted by `delta`.
inline Tensor perturbed(const Tensor& t, std::size_t i, double delta) {
  std::vector<double> v(t.data().begin(), t.data().end());
  v[i] += delta;
  return Tensor::from(t.shape(), std::move(v));
}

}  // namespace testing
