#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "periodnet/tensor.hpp"

namespace periodnet {

/// Draws a tensor from N(0, stddev²) in row-major order.
Tensor normal_init(Shape shape, double stddev, std::mt19937_64& rng, bool requires_grad = true);

/** Query/key/value/output projections of multi-head attention (no biases). */
struct MhaParams {
  Tensor wq, wk, wv, wo;  // each D×D
  std::size_t heads = 1;

  std::size_t model_dim() const { return wq.dim(0); }
  std::size_t head_dim() const { return model_dim() / heads; }

  static MhaParams init(std::size_t d_model, std::size_t heads, std::mt19937_64& rng);
};

/** Dense boolean matrix; true means the query row may attend the key column. */
struct BoolMask {
  std::size_t rows = 0, cols = 0;
  std::vector<std::uint8_t> allowed;

  BoolMask() = default;
  BoolMask(std::size_t r, std::size_t c, bool value = false) : rows(r), cols(c), allowed(r * c, value ? 1 : 0) {}

  bool operator()(std::size_t i, std::size_t j) const { return allowed[i * cols + j] != 0; }
  void set(std::size_t i, std::size_t j, bool v) { allowed[i * cols + j] = v ? 1 : 0; }
  std::size_t row_count(std::size_t i) const;
};

/// Additive bias for masked attention; finite so gradients stay clean.
inline constexpr double kMaskBias = -1e9;

/**
 * Scaled dot-product attention on already-projected inputs: per head,
 * softmax(Q_h K_hᵀ / sqrt(head_dim) + bias) V_h, heads concatenated.
 * Output is not projected by Wo.
 */
Tensor attend(const Tensor& q, const Tensor& k, const Tensor& v, std::size_t heads, const BoolMask* mask = nullptr);

/**
 * Multi-head attention MHA(query, key, value). Masked entries receive
 * kMaskBias before the softmax; a query row with no allowed key is an
 * error rather than a silent NaN.
 */
Tensor mha(const Tensor& query, const Tensor& key, const Tensor& value, const MhaParams& params,
           const BoolMask* mask = nullptr);

enum class MixerKind { Pam, Spam, Full };

std::string to_string(MixerKind kind);
MixerKind parse_mixer(const std::string& text);

struct PamConfig {
  std::size_t period = 8;
  MixerKind mode = MixerKind::Pam;
};

/**
 * Connectivity of the period mixers over a length-L sequence.
 *
 * Pam: query t in block i = t / P sees every position of blocks i−1, i, i+1
 * that exist. Spam: query t sees only {t−P, t, t+P} ∩ [0, L). Full: all keys.
 */
BoolMask build_neighborhood_mask(std::size_t length, std::size_t period, MixerKind mode);

/// Period attention; queries of each block attend the block and its two neighbours.
Tensor pam_forward(const Tensor& z, const MhaParams& params, const PamConfig& cfg);

/// Sparse period attention over phase-aligned triples (attention-based dilated convolution).
Tensor spam_forward(const Tensor& z, const MhaParams& params, const PamConfig& cfg);

/// Dispatches on cfg.mode; Full runs unmasked self-attention.
Tensor mixer_forward(const Tensor& z, const MhaParams& params, const PamConfig& cfg);

/** Period router: a learnable r×D query bank plus one MHA per direction. */
struct RouterParams {
  Tensor memory;   // M, r×D
  MhaParams gather;   // M queries the mixer output
  MhaParams scatter;  // the sequence queries the routing features

  std::size_t length() const { return memory.dim(0); }

  static RouterParams init(std::size_t router_len, std::size_t d_model, std::size_t heads, std::mt19937_64& rng);
};

struct RouterOutput {
  Tensor routing;  // r×D
  Tensor output;   // L×D
};

RouterOutput router_forward_traced(const Tensor& zp, const RouterParams& params);
Tensor router_forward(const Tensor& zp, const RouterParams& params);

}  // namespace periodnet
