#include "periodnet/attention.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "periodnet/ops.hpp"

namespace periodnet {

Tensor normal_init(Shape shape, double stddev, std::mt19937_64& rng, bool requires_grad) {
  std::normal_distribution<double> dist(0.0, stddev);
  std::vector<double> values(shape_numel(shape));
  for (auto& v : values) v = dist(rng);
  return Tensor::from(std::move(shape), std::move(values), requires_grad);
}

MhaParams MhaParams::init(std::size_t d_model, std::size_t heads, std::mt19937_64& rng) {
  if (heads == 0 || d_model % heads != 0) {
    throw DimensionError("model dim " + std::to_string(d_model) + " is not divisible by " + std::to_string(heads) +
                         " heads");
  }
  MhaParams p;
  p.heads = heads;
  p.wq = normal_init({d_model, d_model}, 0.02, rng);
  p.wk = normal_init({d_model, d_model}, 0.02, rng);
  p.wv = normal_init({d_model, d_model}, 0.02, rng);
  p.wo = normal_init({d_model, d_model}, 0.02, rng);
  return p;
}

std::size_t BoolMask::row_count(std::size_t i) const {
  std::size_t n = 0;
  for (std::size_t j = 0; j < cols; ++j) n += allowed[i * cols + j];
  return n;
}

namespace {

Tensor mask_bias(const BoolMask& mask) {
  std::vector<double> bias(mask.rows * mask.cols);
  for (std::size_t i = 0; i < bias.size(); ++i) bias[i] = mask.allowed[i] ? 0.0 : kMaskBias;
  return Tensor::from({mask.rows, mask.cols}, std::move(bias));
}

Tensor head_cols(const Tensor& x, std::size_t heads, std::size_t h) {
  if (heads == 1) return x;
  const std::size_t hd = x.dim(1) / heads;
  return ops::slice(x, 1, h * hd, (h + 1) * hd);
}

}  // namespace

Tensor attend(const Tensor& q, const Tensor& k, const Tensor& v, std::size_t heads, const BoolMask* mask) {
  if (q.rank() != 2 || k.rank() != 2 || v.rank() != 2) throw DimensionError("attend: inputs must be 2-D");
  if (k.dim(0) != v.dim(0)) throw DimensionError("attend: key and value lengths differ");
  if (q.dim(1) != k.dim(1) || v.dim(1) != q.dim(1)) throw DimensionError("attend: model dims differ");
  if (heads == 0 || q.dim(1) % heads != 0) throw DimensionError("attend: model dim not divisible by heads");

  std::optional<Tensor> bias;
  if (mask) {
    if (mask->rows != q.dim(0) || mask->cols != k.dim(0)) {
      throw DimensionError("attend: mask is " + std::to_string(mask->rows) + "x" + std::to_string(mask->cols) +
                           ", scores are " + std::to_string(q.dim(0)) + "x" + std::to_string(k.dim(0)));
    }
    for (std::size_t i = 0; i < mask->rows; ++i) {
      if (mask->row_count(i) == 0) {
        throw std::invalid_argument("attend: query row " + std::to_string(i) + " has every key masked");
      }
    }
    bias = mask_bias(*mask);
  }

  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(q.dim(1) / heads));
  std::vector<Tensor> outs;
  outs.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    auto scores = ops::scale(ops::matmul(head_cols(q, heads, h), ops::transpose(head_cols(k, heads, h))), inv_sqrt);
    if (bias) scores = ops::add(scores, *bias);
    auto weights = ops::softmax_rows(scores);
    if (mask) {
      auto w = weights.data();
      for (std::size_t i = 0; i < w.size(); ++i) {
        if (!mask->allowed[i] && w[i] >= 1e-12) {
          throw NumericError("attend: masked attention weight leaked above 1e-12");
        }
      }
    }
    outs.push_back(ops::matmul(weights, head_cols(v, heads, h)));
  }
  return heads == 1 ? outs.front() : ops::concat(outs, 1);
}

Tensor mha(const Tensor& query, const Tensor& key, const Tensor& value, const MhaParams& params,
           const BoolMask* mask) {
  if (key.dim(0) != value.dim(0)) throw DimensionError("mha: key and value lengths differ");
  auto q = ops::matmul(query, params.wq);
  auto k = ops::matmul(key, params.wk);
  auto v = ops::matmul(value, params.wv);
  return ops::matmul(attend(q, k, v, params.heads, mask), params.wo);
}

std::string to_string(MixerKind kind) {
  switch (kind) {
    case MixerKind::Pam: return "PAM";
    case MixerKind::Spam: return "SPAM";
    case MixerKind::Full: return "FULL";
  }
  return "?";
}

MixerKind parse_mixer(const std::string& text) {
  std::string t;
  for (char c : text) t += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  if (t == "PAM") return MixerKind::Pam;
  if (t == "SPAM") return MixerKind::Spam;
  if (t == "FULL" || t == "FAM") return MixerKind::Full;
  throw std::invalid_argument("unknown mixer '" + text + "' (expected PAM, SPAM or FULL)");
}

BoolMask build_neighborhood_mask(std::size_t length, std::size_t period, MixerKind mode) {
  if (period == 0 || length % period != 0) {
    throw DimensionError("sequence length " + std::to_string(length) + " is not a multiple of period " +
                         std::to_string(period));
  }
  BoolMask mask(length, length);
  for (std::size_t t = 0; t < length; ++t) {
    for (std::size_t s = 0; s < length; ++s) {
      bool allowed = false;
      switch (mode) {
        case MixerKind::Pam: {
          const auto bt = t / period, bs = s / period;
          allowed = bs + 1 >= bt && bs <= bt + 1;
          break;
        }
        case MixerKind::Spam:
          allowed = s == t || s + period == t || t + period == s;
          break;
        case MixerKind::Full:
          allowed = true;
          break;
      }
      mask.set(t, s, allowed);
    }
  }
  return mask;
}

namespace {

void require_blocks(const Tensor& z, std::size_t period, const char* op) {
  if (z.rank() != 2) throw DimensionError(std::string(op) + ": expected L×D input");
  if (period < 1 || z.dim(0) % period != 0) {
    throw DimensionError(std::string(op) + ": length " + std::to_string(z.dim(0)) + " is not a multiple of period " +
                         std::to_string(period));
  }
}

// Each block of `block` queries attends the keys of blocks i−1, i, i+1.
// Slicing the contiguous neighbour range equals concatenating the key
// sequence shifted back by one block, unshifted, and shifted forward.
Tensor block_neighborhood_attend(const Tensor& q, const Tensor& k, const Tensor& v, std::size_t block,
                                 std::size_t heads) {
  const std::size_t blocks = q.dim(0) / block;
  if (blocks == 1) return attend(q, k, v, heads);
  std::vector<Tensor> outs;
  outs.reserve(blocks);
  for (std::size_t i = 0; i < blocks; ++i) {
    const std::size_t lo = (i == 0 ? 0 : i - 1) * block;
    const std::size_t hi = std::min(blocks, i + 2) * block;
    auto qb = ops::slice(q, 0, i * block, (i + 1) * block);
    outs.push_back(attend(qb, ops::slice(k, 0, lo, hi), ops::slice(v, 0, lo, hi), heads));
  }
  return ops::concat(outs, 0);
}

}  // namespace

Tensor pam_forward(const Tensor& z, const MhaParams& params, const PamConfig& cfg) {
  require_blocks(z, cfg.period, "pam_forward");
  auto q = ops::matmul(z, params.wq);
  auto k = ops::matmul(z, params.wk);
  auto v = ops::matmul(z, params.wv);
  return ops::matmul(block_neighborhood_attend(q, k, v, cfg.period, params.heads), params.wo);
}

Tensor spam_forward(const Tensor& z, const MhaParams& params, const PamConfig& cfg) {
  require_blocks(z, cfg.period, "spam_forward");
  const std::size_t length = z.dim(0), period = cfg.period, per_phase = length / period;

  // Dilated sampling: phase-major order, phase s holds s, s+P, s+2P, ...
  std::vector<std::size_t> to_phase(length), to_time(length);
  for (std::size_t s = 0; s < period; ++s) {
    for (std::size_t j = 0; j < per_phase; ++j) {
      to_phase[s * per_phase + j] = s + j * period;
      to_time[s + j * period] = s * per_phase + j;
    }
  }

  BoolMask window(per_phase, per_phase);
  for (std::size_t i = 0; i < per_phase; ++i) {
    for (std::size_t j = (i == 0 ? 0 : i - 1); j <= std::min(per_phase - 1, i + 1); ++j) window.set(i, j, true);
  }

  auto q = ops::gather_rows(ops::matmul(z, params.wq), to_phase);
  auto k = ops::gather_rows(ops::matmul(z, params.wk), to_phase);
  auto v = ops::gather_rows(ops::matmul(z, params.wv), to_phase);
  std::vector<Tensor> phases;
  phases.reserve(period);
  for (std::size_t s = 0; s < period; ++s) {
    const std::size_t lo = s * per_phase, hi = lo + per_phase;
    phases.push_back(attend(ops::slice(q, 0, lo, hi), ops::slice(k, 0, lo, hi), ops::slice(v, 0, lo, hi),
                            params.heads, &window));
  }
  auto mixed = ops::gather_rows(ops::concat(phases, 0), to_time);
  return ops::matmul(mixed, params.wo);
}

Tensor mixer_forward(const Tensor& z, const MhaParams& params, const PamConfig& cfg) {
  switch (cfg.mode) {
    case MixerKind::Pam: return pam_forward(z, params, cfg);
    case MixerKind::Spam: return spam_forward(z, params, cfg);
    case MixerKind::Full: return mha(z, z, z, params);
  }
  throw std::invalid_argument("mixer_forward: unknown mode");
}

RouterParams RouterParams::init(std::size_t router_len, std::size_t d_model, std::size_t heads,
                                std::mt19937_64& rng) {
  if (router_len == 0) throw std::invalid_argument("router length must be at least 1");
  RouterParams p;
  p.memory = normal_init({router_len, d_model}, 0.02, rng);
  p.gather = MhaParams::init(d_model, heads, rng);
  p.scatter = MhaParams::init(d_model, heads, rng);
  return p;
}

RouterOutput router_forward_traced(const Tensor& zp, const RouterParams& params) {
  RouterOutput out;
  out.routing = mha(params.memory, zp, zp, params.gather);
  out.output = mha(zp, out.routing, out.routing, params.scatter);
  return out;
}

Tensor router_forward(const Tensor& zp, const RouterParams& params) { return router_forward_traced(zp, params).output; }

}  // namespace periodnet
