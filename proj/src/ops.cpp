#include "periodnet/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace periodnet::ops {

namespace {

using detail::Node;
using NodePtr = std::shared_ptr<Node>;

// Builds the output node. The backward closure is only kept when some
// input participates in differentiation.
Tensor make(const char* op, Shape shape, std::vector<double> data, std::vector<NodePtr> parents,
            std::function<void(Node&)> backward) {
  for (double v : data) {
    if (!std::isfinite(v)) throw NumericError(std::string("non-finite value produced by ") + op);
  }
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->op = op;
  node->is_leaf = false;
  bool needs = std::any_of(parents.begin(), parents.end(), [](const NodePtr& p) { return p->requires_grad; });
  if (needs) {
    node->requires_grad = true;
    node->parents = std::move(parents);
    node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                         shape_str(t.shape()));
  }
}

void require_same(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
}

// C[m×n] += A[m×k] · B[k×n]
void gemm_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      double aip = a[i * k + p];
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
}

// C[m×n] += A[m×k] · B[n×k]ᵀ
void gemm_nt_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += a[i * k + p] * b[j * k + p];
      c[i * n + j] += s;
    }
  }
}

// C[k×n] += A[m×k]ᵀ · B[m×n]
void gemm_tn_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      double aip = a[i * k + p];
      const double* brow = b + i * n;
      double* crow = c + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
}

template <typename F, typename G>
Tensor unary(const char* op, const Tensor& x, F f, G dfdx) {
  auto xs = x.data();
  std::vector<double> out(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) out[i] = f(xs[i]);
  NodePtr xn = x.node();
  return make(op, x.shape(), std::move(out), {xn}, [xn, dfdx](Node& self) {
    if (!xn->requires_grad) return;
    auto& g = xn->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * dfdx(xn->data[i]);
  });
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw DimensionError("matmul: inner dimensions disagree " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  std::vector<double> out(m * n, 0.0);
  gemm_acc(a.data().data(), b.data().data(), out.data(), m, k, n);
  NodePtr an = a.node(), bn = b.node();
  return make("matmul", {m, n}, std::move(out), {an, bn}, [an, bn, m, k, n](Node& self) {
    if (an->requires_grad) gemm_nt_acc(self.grad.data(), bn->data.data(), an->grad_buffer().data(), m, n, k);
    if (bn->requires_grad) gemm_tn_acc(an->data.data(), self.grad.data(), bn->grad_buffer().data(), m, k, n);
  });
}

Tensor transpose(const Tensor& a) {
  require_rank(a, 2, "transpose");
  const std::size_t m = a.dim(0), n = a.dim(1);
  auto src = a.data();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = src[i * n + j];
  NodePtr an = a.node();
  return make("transpose", {n, m}, std::move(out), {an}, [an, m, n](Node& self) {
    if (!an->requires_grad) return;
    auto& g = an->grad_buffer();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) g[i * n + j] += self.grad[j * m + i];
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same(a, b, "add");
  auto x = a.data(), y = b.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + y[i];
  NodePtr an = a.node(), bn = b.node();
  return make("add", a.shape(), std::move(out), {an, bn}, [an, bn](Node& self) {
    if (an->requires_grad) an->accumulate(self.grad);
    if (bn->requires_grad) bn->accumulate(self.grad);
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same(a, b, "sub");
  auto x = a.data(), y = b.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - y[i];
  NodePtr an = a.node(), bn = b.node();
  return make("sub", a.shape(), std::move(out), {an, bn}, [an, bn](Node& self) {
    if (an->requires_grad) an->accumulate(self.grad);
    if (bn->requires_grad) {
      auto& g = bn->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same(a, b, "mul");
  auto x = a.data(), y = b.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * y[i];
  NodePtr an = a.node(), bn = b.node();
  return make("mul", a.shape(), std::move(out), {an, bn}, [an, bn](Node& self) {
    if (an->requires_grad) {
      auto& g = an->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * bn->data[i];
    }
    if (bn->requires_grad) {
      auto& g = bn->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * an->data[i];
    }
  });
}

Tensor scale(const Tensor& a, double s) {
  return unary("scale", a, [s](double v) { return v * s; }, [s](double) { return s; });
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  require_rank(x, 2, "add_bias");
  const std::size_t m = x.dim(0), n = x.dim(1);
  if (bias.numel() != n || bias.rank() != 1) {
    throw DimensionError("add_bias: bias " + shape_str(bias.shape()) + " does not match " + shape_str(x.shape()));
  }
  auto xs = x.data(), bs = bias.data();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = xs[i * n + j] + bs[j];
  NodePtr xn = x.node(), bn = bias.node();
  return make("add_bias", x.shape(), std::move(out), {xn, bn}, [xn, bn, m, n](Node& self) {
    if (xn->requires_grad) xn->accumulate(self.grad);
    if (bn->requires_grad) {
      auto& g = bn->grad_buffer();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) g[j] += self.grad[i * n + j];
    }
  });
}

Tensor relu(const Tensor& x) {
  return unary("relu", x, [](double v) { return v > 0.0 ? v : 0.0; },
               [](double v) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor gelu(const Tensor& x) {
  constexpr double c = 0.7978845608028654;  // sqrt(2/pi)
  constexpr double a = 0.044715;
  return unary(
      "gelu", x, [](double v) { return 0.5 * v * (1.0 + std::tanh(c * (v + a * v * v * v))); },
      [](double v) {
        double u = c * (v + a * v * v * v);
        double t = std::tanh(u);
        double du = c * (1.0 + 3.0 * a * v * v);
        return 0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * du;
      });
}

Tensor softmax_rows(const Tensor& x) {
  require_rank(x, 2, "softmax_rows");
  const std::size_t m = x.dim(0), n = x.dim(1);
  auto xs = x.data();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = xs.data() + i * n;
    double mx = *std::max_element(row, row + n);
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      out[i * n + j] = std::exp(row[j] - mx);
      total += out[i * n + j];
    }
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] /= total;
  }
  NodePtr xn = x.node();
  return make("softmax_rows", x.shape(), std::move(out), {xn}, [xn, m, n](Node& self) {
    if (!xn->requires_grad) return;
    auto& g = xn->grad_buffer();
    for (std::size_t i = 0; i < m; ++i) {
      const double* y = self.data.data() + i * n;
      const double* gy = self.grad.data() + i * n;
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += y[j] * gy[j];
      for (std::size_t j = 0; j < n; ++j) g[i * n + j] += y[j] * (gy[j] - dot);
    }
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  const std::size_t d = x.shape().back();
  if (gamma.numel() != d || beta.numel() != d) {
    throw DimensionError("layer_norm: gamma/beta must have " + std::to_string(d) + " entries");
  }
  const std::size_t rows = x.numel() / d;
  auto xs = x.data(), gs = gamma.data(), bs = beta.data();
  std::vector<double> out(x.numel());
  std::vector<double> xhat(x.numel());
  std::vector<double> inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = xs.data() + r * d;
    double mu = 0.0;
    for (std::size_t j = 0; j < d; ++j) mu += row[j];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(d);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j) {
      xhat[r * d + j] = (row[j] - mu) * inv_std[r];
      out[r * d + j] = xhat[r * d + j] * gs[j] + bs[j];
    }
  }
  NodePtr xn = x.node(), gn = gamma.node(), bn = beta.node();
  return make("layer_norm", x.shape(), std::move(out), {xn, gn, bn},
              [xn, gn, bn, rows, d, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& self) {
                const auto& gy = self.grad;
                if (gn->requires_grad) {
                  auto& g = gn->grad_buffer();
                  for (std::size_t r = 0; r < rows; ++r)
                    for (std::size_t j = 0; j < d; ++j) g[j] += gy[r * d + j] * xhat[r * d + j];
                }
                if (bn->requires_grad) {
                  auto& g = bn->grad_buffer();
                  for (std::size_t r = 0; r < rows; ++r)
                    for (std::size_t j = 0; j < d; ++j) g[j] += gy[r * d + j];
                }
                if (xn->requires_grad) {
                  auto& g = xn->grad_buffer();
                  const double inv_d = 1.0 / static_cast<double>(d);
                  for (std::size_t r = 0; r < rows; ++r) {
                    double s1 = 0.0, s2 = 0.0;
                    for (std::size_t j = 0; j < d; ++j) {
                      double gh = gy[r * d + j] * gn->data[j];
                      s1 += gh;
                      s2 += gh * xhat[r * d + j];
                    }
                    for (std::size_t j = 0; j < d; ++j) {
                      double gh = gy[r * d + j] * gn->data[j];
                      g[r * d + j] += inv_std[r] * (gh - inv_d * s1 - xhat[r * d + j] * inv_d * s2);
                    }
                  }
                }
              });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw DimensionError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
  }
  for (auto d : shape) {
    if (d == 0) throw DimensionError("reshape: zero-sized axis in " + shape_str(shape));
  }
  NodePtr xn = x.node();
  std::vector<double> out(x.data().begin(), x.data().end());
  return make("reshape", std::move(shape), std::move(out), {xn}, [xn](Node& self) {
    if (xn->requires_grad) xn->accumulate(self.grad);
  });
}

namespace {

// Splits a shape around `axis` into (outer, axis length, inner).
struct AxisView {
  std::size_t outer = 1, len = 1, inner = 1;
};

AxisView axis_view(const Shape& s, std::size_t axis) {
  AxisView v;
  for (std::size_t i = 0; i < axis; ++i) v.outer *= s[i];
  v.len = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) v.inner *= s[i];
  return v;
}

}  // namespace

Tensor concat(std::span<const Tensor> parts, std::size_t axis) {
  if (parts.empty()) throw DimensionError("concat: no inputs");
  const Shape& first = parts.front().shape();
  if (axis >= first.size()) throw DimensionError("concat: axis out of range for " + shape_str(first));
  Shape out_shape = first;
  out_shape[axis] = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    if (s.size() != first.size()) throw DimensionError("concat: rank mismatch");
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (i != axis && s[i] != first[i]) {
        throw DimensionError("concat: " + shape_str(s) + " incompatible with " + shape_str(first));
      }
    }
    out_shape[axis] += s[axis];
  }
  auto ov = axis_view(out_shape, axis);
  std::vector<double> out(shape_numel(out_shape));
  std::vector<NodePtr> nodes;
  std::vector<std::size_t> offsets;
  std::size_t offset = 0;
  for (const auto& p : parts) {
    auto pv = axis_view(p.shape(), axis);
    auto src = p.data();
    for (std::size_t o = 0; o < pv.outer; ++o) {
      std::copy_n(src.data() + o * pv.len * pv.inner, pv.len * pv.inner,
                  out.data() + (o * ov.len + offset) * ov.inner);
    }
    nodes.push_back(p.node());
    offsets.push_back(offset);
    offset += pv.len;
  }
  auto parents = nodes;
  return make("concat", out_shape, std::move(out), std::move(parents),
              [nodes, offsets, ov](Node& self) {
                for (std::size_t k = 0; k < nodes.size(); ++k) {
                  auto& n = nodes[k];
                  if (!n->requires_grad) continue;
                  const std::size_t len = n->data.size() / (ov.outer * ov.inner);
                  auto& g = n->grad_buffer();
                  for (std::size_t o = 0; o < ov.outer; ++o) {
                    const double* src = self.grad.data() + (o * ov.len + offsets[k]) * ov.inner;
                    double* dst = g.data() + o * len * ov.inner;
                    for (std::size_t i = 0; i < len * ov.inner; ++i) dst[i] += src[i];
                  }
                }
              });
}

Tensor concat(std::initializer_list<Tensor> parts, std::size_t axis) {
  return concat(std::span<const Tensor>(parts.begin(), parts.size()), axis);
}

Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin, std::size_t end) {
  const Shape& s = x.shape();
  if (axis >= s.size()) throw DimensionError("slice: axis out of range for " + shape_str(s));
  if (begin >= end || end > s[axis]) {
    throw DimensionError("slice: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                         ") invalid for axis of length " + std::to_string(s[axis]));
  }
  auto v = axis_view(s, axis);
  const std::size_t len = end - begin;
  Shape out_shape = s;
  out_shape[axis] = len;
  std::vector<double> out(v.outer * len * v.inner);
  auto src = x.data();
  for (std::size_t o = 0; o < v.outer; ++o) {
    std::copy_n(src.data() + (o * v.len + begin) * v.inner, len * v.inner, out.data() + o * len * v.inner);
  }
  NodePtr xn = x.node();
  return make("slice", std::move(out_shape), std::move(out), {xn}, [xn, v, begin, len](Node& self) {
    if (!xn->requires_grad) return;
    auto& g = xn->grad_buffer();
    for (std::size_t o = 0; o < v.outer; ++o) {
      const double* src = self.grad.data() + o * len * v.inner;
      double* dst = g.data() + (o * v.len + begin) * v.inner;
      for (std::size_t i = 0; i < len * v.inner; ++i) dst[i] += src[i];
    }
  });
}

Tensor gather_rows(const Tensor& x, std::span<const std::size_t> rows) {
  require_rank(x, 2, "gather_rows");
  if (rows.empty()) throw DimensionError("gather_rows: empty index list");
  const std::size_t m = x.dim(0), n = x.dim(1);
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  std::vector<double> out(idx.size() * n);
  auto src = x.data();
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= m) throw DimensionError("gather_rows: row index " + std::to_string(idx[i]) + " out of range");
    std::copy_n(src.data() + idx[i] * n, n, out.data() + i * n);
  }
  NodePtr xn = x.node();
  return make("gather_rows", {idx.size(), n}, std::move(out), {xn}, [xn, idx, n](Node& self) {
    if (!xn->requires_grad) return;
    auto& g = xn->grad_buffer();
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (std::size_t j = 0; j < n; ++j) g[idx[i] * n + j] += self.grad[i * n + j];
  });
}

Tensor sum(const Tensor& x) {
  auto xs = x.data();
  double total = std::accumulate(xs.begin(), xs.end(), 0.0);
  NodePtr xn = x.node();
  return make("sum", {1}, {total}, {xn}, [xn](Node& self) {
    if (!xn->requires_grad) return;
    auto& g = xn->grad_buffer();
    for (auto& v : g) v += self.grad[0];
  });
}

Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<double>(x.numel())); }

}  // namespace periodnet::ops
