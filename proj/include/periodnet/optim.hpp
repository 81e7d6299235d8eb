#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "periodnet/tensor.hpp"

namespace periodnet {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/** Per-parameter first/second moments plus the shared step counter. */
struct AdamState {
  AdamOptions options;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::uint64_t t = 0;
};

AdamState make_adam_state(const std::vector<Tensor>& params, AdamOptions options);

/**
 * One bias-corrected Adam update, in place. `grads[i]` pairs with
 * `params[i]`.
 */
void adam_step(std::vector<Tensor>& params, const std::vector<std::vector<double>>& grads, AdamState& state);

/// Convenience overload that reads each parameter's accumulated gradient.
void adam_step(std::vector<Tensor>& params, AdamState& state);

struct NamedParam {
  std::string name;
  Tensor tensor;
};

struct GradCheckEntry {
  std::string name;
  std::size_t count = 0;
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  bool passed = false;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double tolerance = 0.0;
  bool passed = false;

  const GradCheckEntry& worst() const;
};

struct GradCheckOptions {
  double h = 1e-5;
  double tol = 1e-4;
  /// Scales the analytic gradient of the named parameter; negative-control hook.
  std::string corrupt_param;
  double corrupt_factor = 1.0;
};

/**
 * Compares analytic gradients of `loss_fn` with central differences for
 * every entry of every parameter.
 *
 * The relative error of a parameter is max|analytic − numeric| divided by
 * max(max|analytic|, max|numeric|); when both gradients vanish (< 1e-12)
 * the absolute error is used instead. The closure is evaluated twice up
 * front and must be bit-reproducible.
 */
GradCheckReport finite_diff_check(const std::function<Tensor()>& loss_fn, std::vector<NamedParam> params,
                                  const GradCheckOptions& options = {});

}  // namespace periodnet
