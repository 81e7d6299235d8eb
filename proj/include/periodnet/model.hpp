#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "periodnet/attention.hpp"
#include "periodnet/grouping.hpp"
#include "periodnet/layers.hpp"
#include "periodnet/optim.hpp"
#include "periodnet/tensor.hpp"

namespace periodnet {

/**
 * Hyperparameters of PeriodNet / SPeriodNet.
 *
 * `groups == 0` disables the learnable grouping and mixes the mean of all
 * variable streams (plain joint modeling); for a single variable this is
 * the identity. `periods` empty means "base_period, doubled per block".
 * `group_hidden == 0` means max(C, 2G).
 */
struct ModelConfig {
  std::size_t variables = 1;
  std::size_t input_len = 96;
  std::size_t horizon = 96;
  std::size_t d_model = 16;
  std::size_t heads = 2;
  std::size_t base_period = 8;
  std::vector<std::size_t> periods;
  std::size_t router_len = 4;
  std::size_t groups = 0;
  std::size_t group_hidden = 0;
  std::size_t enc_blocks = 2;
  std::size_t dif_blocks = 1;
  std::size_t ffn_width = 32;
  MixerKind mixer = MixerKind::Pam;
  Activation activation = Activation::Relu;
  bool positional_encoding = true;

  /// Fills derived fields (periods, group_hidden) and validates.
  ModelConfig resolved() const;
  void validate() const;

  /// Flat key=value form used by config files and checkpoints.
  std::vector<std::pair<std::string, std::string>> entries() const;
  /// Applies one key=value pair; unknown keys throw std::invalid_argument.
  void set(const std::string& key, const std::string& value);
  static bool is_key(const std::string& key);
};

struct EncoderBlockParams {
  std::size_t period = 8;
  LayerNormParams mix_norm;
  std::optional<IgmParams> igm;
  MhaParams mixer;
  LayerNormParams route_norm;
  RouterParams router;
  FeedForward ffn;
  LayerNormParams out_norm;
};

struct DiffuserBlockParams {
  std::size_t period = 8;
  LayerNormParams self_norm;
  MhaParams self_mixer;
  LayerNormParams cross_norm;
  MhaParams cross;
  FeedForward ffn;
  LayerNormParams out_norm;
};

/// Sinusoidal positional table, L×D.
Tensor positional_encoding(std::size_t length, std::size_t d_model);

/// x: L×C → [L, D, C]; value embedding 1→D shared by every variable.
Tensor embed(const Tensor& x, const Linear& value_embedding, bool add_position);

struct Padded {
  Tensor value;
  std::size_t original_len = 0;
};

/// Left-pads with copies of the first row up to the next multiple of `period`.
Padded pad_to_period(const Tensor& z, std::size_t period);
Tensor trim_padding(const Tensor& z, std::size_t original_len);

/// Pads, runs the configured mixer, and trims back.
Tensor padded_mixer(const Tensor& z, const MhaParams& params, std::size_t period, MixerKind mode);

/// [L, D, C] → [L, D, C].
Tensor encoder_block(const Tensor& x, const EncoderBlockParams& block, const ModelConfig& cfg);

/// L×D → T×D, linear over the time axis, independent per channel.
Tensor fc_predict(const Tensor& h_last, const Linear& predictor);

/// T×D coarse prediction refined against one encoder state (L×D).
Tensor diffuser_block(const Tensor& z_in, const Tensor& h_cross, const DiffuserBlockParams& block,
                      const ModelConfig& cfg);

struct ForwardTrace {
  /// encoder[i][c] is the output of block i+1 for variable c, L×D.
  std::vector<std::vector<Tensor>> encoder;
  /// Encoder block index (0-based) consumed by each diffuser block.
  std::vector<std::size_t> diffuser_sources;
  Tensor forecast;  // T×C
};

class PeriodNet {
 public:
  PeriodNet(const ModelConfig& cfg, std::uint64_t seed);
  PeriodNet(const PeriodNet&) = delete;
  PeriodNet& operator=(const PeriodNet&) = delete;

  const ModelConfig& config() const { return cfg_; }

  /// Every trainable tensor with a stable dotted name, in registration order.
  const std::vector<NamedParam>& named_parameters() const { return params_; }
  std::vector<Tensor> parameters() const;
  std::size_t parameter_count() const;
  Tensor parameter(const std::string& name) const;

  /// x: L×C (normalized) → T×C.
  Tensor forward(const Tensor& x) const;
  ForwardTrace forward_traced(const Tensor& x) const;

  std::uint64_t forward_count() const { return forward_count_.load(); }

  const Linear& value_embedding() const { return embedding_; }
  const std::vector<EncoderBlockParams>& encoder_blocks() const { return encoder_; }
  const Linear& predictor() const { return predictor_; }
  const std::vector<DiffuserBlockParams>& diffuser_blocks() const { return diffuser_; }
  const Linear& readout() const { return readout_; }

  /// Copies values in; shapes must match the registered parameters.
  void load_values(const std::vector<std::pair<std::string, Tensor>>& values);
  /// Snapshot of every parameter's values, detached.
  std::vector<std::vector<double>> snapshot() const;
  void restore(const std::vector<std::vector<double>>& values);
  /// Adds N(0, stddev²) noise to every parameter. Gradient checks use this to
  /// leave the near-symmetric initial point, where attention score gradients
  /// sit below finite-difference resolution and zero biases park ReLUs on the kink.
  void jitter(double stddev, std::uint64_t seed);

 private:
  void add(const std::string& name, const Tensor& t);
  void add(const std::string& prefix, const Linear& l);
  void add(const std::string& prefix, const LayerNormParams& n);
  void add(const std::string& prefix, const MhaParams& p);
  void add(const std::string& prefix, const FeedForward& f);

  ModelConfig cfg_;
  Linear embedding_;
  std::vector<EncoderBlockParams> encoder_;
  Linear predictor_;
  std::vector<DiffuserBlockParams> diffuser_;
  Linear readout_;
  std::vector<NamedParam> params_;
  mutable std::atomic<std::uint64_t> forward_count_{0};
};

}  // namespace periodnet
