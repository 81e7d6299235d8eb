#include "periodnet/optim.hpp"

#include <algorithm>
#include <cmath>

namespace periodnet {

AdamState make_adam_state(const std::vector<Tensor>& params, AdamOptions options) {
  AdamState state;
  state.options = options;
  for (const auto& p : params) {
    state.m.emplace_back(p.numel(), 0.0);
    state.v.emplace_back(p.numel(), 0.0);
  }
  return state;
}

void adam_step(std::vector<Tensor>& params, const std::vector<std::vector<double>>& grads, AdamState& state) {
  if (grads.size() != params.size() || state.m.size() != params.size() || state.v.size() != params.size()) {
    throw DimensionError("adam_step: parameter, gradient and state counts disagree");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto n = params[i].numel();
    if (grads[i].size() != n || state.m[i].size() != n || state.v[i].size() != n) {
      throw DimensionError("adam_step: shape mismatch for parameter " + std::to_string(i));
    }
  }
  const auto& o = state.options;
  state.t += 1;
  const double t = static_cast<double>(state.t);
  const double bc1 = 1.0 - std::pow(o.beta1, t);
  const double bc2 = 1.0 - std::pow(o.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto w = params[i].mutable_data();
    auto& m = state.m[i];
    auto& v = state.v[i];
    const auto& g = grads[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = o.beta1 * m[j] + (1.0 - o.beta1) * g[j];
      v[j] = o.beta2 * v[j] + (1.0 - o.beta2) * g[j] * g[j];
      const double m_hat = m[j] / bc1;
      const double v_hat = v[j] / bc2;
      w[j] -= o.lr * m_hat / (std::sqrt(v_hat) + o.eps);
    }
  }
}

void adam_step(std::vector<Tensor>& params, AdamState& state) {
  std::vector<std::vector<double>> grads;
  grads.reserve(params.size());
  for (const auto& p : params) grads.push_back(p.grad());
  adam_step(params, grads, state);
}

const GradCheckEntry& GradCheckReport::worst() const {
  if (entries.empty()) throw std::logic_error("empty gradient-check report");
  return *std::max_element(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
    return a.max_rel_error < b.max_rel_error;
  });
}

GradCheckReport finite_diff_check(const std::function<Tensor()>& loss_fn, std::vector<NamedParam> params,
                                  const GradCheckOptions& options) {
  const double reference = loss_fn().item();
  if (loss_fn().item() != reference) {
    throw std::runtime_error("finite_diff_check: closure is not deterministic (repeated forward differs)");
  }

  for (auto& p : params) p.tensor.zero_grad();
  backward(loss_fn());

  GradCheckReport report;
  report.tolerance = options.tol;
  report.passed = true;
  for (auto& p : params) {
    auto analytic = p.tensor.grad();
    if (p.name == options.corrupt_param) {
      for (auto& g : analytic) g *= options.corrupt_factor;
    }
    auto values = p.tensor.mutable_data();
    double max_abs = 0.0, scale = 0.0;
    for (std::size_t j = 0; j < values.size(); ++j) {
      const double saved = values[j];
      values[j] = saved + options.h;
      const double up = loss_fn().item();
      values[j] = saved - options.h;
      const double down = loss_fn().item();
      values[j] = saved;
      const double numeric = (up - down) / (2.0 * options.h);
      max_abs = std::max(max_abs, std::abs(analytic[j] - numeric));
      scale = std::max({scale, std::abs(analytic[j]), std::abs(numeric)});
    }
    GradCheckEntry entry;
    entry.name = p.name;
    entry.count = values.size();
    entry.max_abs_error = max_abs;
    entry.max_rel_error = scale < 1e-12 ? max_abs : max_abs / scale;
    entry.passed = entry.max_rel_error < options.tol;
    report.passed = report.passed && entry.passed;
    report.entries.push_back(std::move(entry));
  }
  for (auto& p : params) p.tensor.zero_grad();
  return report;
}

}  // namespace periodnet
