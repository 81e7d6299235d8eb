#include "periodnet/grouping.hpp"

#include <stdexcept>

#include "periodnet/ops.hpp"

namespace periodnet {

IgmParams IgmParams::init(std::size_t variables, std::size_t groups, std::size_t hidden, std::mt19937_64& rng) {
  if (variables == 0 || groups == 0 || hidden == 0) {
    throw std::invalid_argument("grouping needs at least one variable, group and hidden unit");
  }
  IgmParams p;
  p.group_hidden = Linear::init(variables, hidden, rng);
  p.group_out = Linear::init(hidden, groups, rng);
  p.ungroup_hidden = Linear::init(groups, hidden, rng);
  p.ungroup_out = Linear::init(hidden, variables, rng);
  return p;
}

namespace {

Tensor two_layer_over_last_axis(const Tensor& x, const Linear& first, const Linear& second, Activation act,
                                const char* op) {
  if (x.rank() != 3) throw DimensionError(std::string(op) + ": expected [L, D, streams], got " + shape_str(x.shape()));
  const std::size_t in = first.weight.dim(0);
  if (x.dim(2) != in) {
    throw DimensionError(std::string(op) + ": last axis is " + std::to_string(x.dim(2)) + ", parameters expect " +
                         std::to_string(in));
  }
  const std::size_t length = x.dim(0), channels = x.dim(1);
  auto flat = ops::reshape(x, {length * channels, in});
  auto out = second(activate(first(flat), act));
  return ops::reshape(out, {length, channels, second.weight.dim(1)});
}

}  // namespace

Tensor regroup(const Tensor& x, const IgmParams& params, Activation act) {
  return two_layer_over_last_axis(x, params.group_hidden, params.group_out, act, "regroup");
}

Tensor ungroup(const Tensor& xp, const IgmParams& params, Activation act) {
  return two_layer_over_last_axis(xp, params.ungroup_hidden, params.ungroup_out, act, "ungroup");
}

Tensor stack_streams(const std::vector<Tensor>& streams) {
  if (streams.empty()) throw DimensionError("stack_streams: no streams");
  const std::size_t length = streams.front().dim(0), channels = streams.front().dim(1);
  if (streams.size() == 1) return ops::reshape(streams.front(), {length, channels, 1});
  std::vector<Tensor> columns;
  columns.reserve(streams.size());
  for (const auto& s : streams) {
    if (s.shape() != streams.front().shape()) throw DimensionError("stack_streams: streams differ in shape");
    columns.push_back(ops::reshape(s, {length * channels, 1}));
  }
  return ops::reshape(ops::concat(columns, 1), {length, channels, streams.size()});
}

std::vector<Tensor> unstack_streams(const Tensor& x) {
  if (x.rank() != 3) throw DimensionError("unstack_streams: expected [L, D, K], got " + shape_str(x.shape()));
  const std::size_t length = x.dim(0), channels = x.dim(1), count = x.dim(2);
  if (count == 1) return {ops::reshape(x, {length, channels})};
  auto flat = ops::reshape(x, {length * channels, count});
  std::vector<Tensor> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    out.push_back(ops::reshape(ops::slice(flat, 1, k, k + 1), {length, channels}));
  }
  return out;
}

}  // namespace periodnet
