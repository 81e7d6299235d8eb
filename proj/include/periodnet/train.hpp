#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "periodnet/data.hpp"
#include "periodnet/model.hpp"

namespace periodnet {

struct TrainConfig {
  double lr = 1e-3;
  std::size_t batch_size = 16;
  std::size_t max_epochs = 20;
  std::size_t max_steps = 0;  // 0 = no step cap
  std::size_t patience = 3;
  std::uint64_t seed = 0;

  void validate() const;
};

/** How a raw frame becomes normalized train/val/test windows. */
struct DataConfig {
  SplitSpec split{6, 2, 2};
  std::size_t stride = 1;
  std::size_t eval_stride = 1;  // stride for validation/test windows
};

struct Dataset {
  std::vector<std::string> names;
  NormStats stats;
  std::vector<Window> train, val, test;
  /// Fingerprint of the normalized splits and window geometry.
  std::uint64_t preprocessing_hash = 0;
};

/// Splits chronologically, normalizes with training statistics, and windows each split.
Dataset prepare_dataset(const SeriesFrame& frame, const DataConfig& data, std::size_t input_len,
                        std::size_t horizon);

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
};

/** Tracks the best validation loss and the patience budget. */
class EarlyStopper {
 public:
  explicit EarlyStopper(std::size_t patience) : patience_(patience) {}

  /// Returns true when `val_loss` strictly improves on the best so far.
  bool observe(std::size_t epoch, double val_loss);
  bool should_stop() const { return stale_ >= patience_; }
  std::optional<std::size_t> best_epoch() const { return best_epoch_; }
  double best_loss() const { return best_loss_; }

 private:
  std::size_t patience_;
  std::size_t stale_ = 0;
  std::optional<std::size_t> best_epoch_;
  double best_loss_ = 0.0;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  std::size_t steps = 0;
  std::size_t best_epoch = 0;
  double best_val = 0.0;
};

/// Non-finite loss during training; the message names the step.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(std::size_t step, const std::string& detail);
  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

struct Metrics {
  double mse = 0.0;
  double mae = 0.0;
};

/// Mean-squared-error loss tensor for one window.
Tensor window_loss(const PeriodNet& model, const Window& w);

/// Metrics averaged over all windows, on the normalized scale.
Metrics evaluate(const PeriodNet& model, const std::vector<Window>& windows);

/**
 * Adam on the L2 loss with seeded per-epoch shuffling. Validation runs after
 * every epoch, the best parameters are restored at the end. When
 * `val_override` is set it replaces the validation measurement (tests).
 */
TrainResult train(PeriodNet& model, const Dataset& data, const TrainConfig& cfg,
                  const std::function<double(std::size_t epoch)>& val_override = {});

/// Repeats the final observed row `horizon` times.
Tensor baseline_repeat_last(const Tensor& x, std::size_t horizon);
Metrics evaluate_repeat_last(const std::vector<Window>& windows);

// ------------------------------------------------------------- checkpoints

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  ModelConfig config;
  NormStats stats;
  std::vector<std::string> variable_names;
  std::vector<std::pair<std::string, Tensor>> tensors;
};

Checkpoint make_checkpoint(const PeriodNet& model, const NormStats& stats, const std::vector<std::string>& names);

/// "PNETCKPT", u32 version, u64 manifest size, UTF-8 manifest, little-endian f64 payload.
std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::string& bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Builds a model from the checkpoint's config and copies its parameters in.
std::unique_ptr<PeriodNet> instantiate(const Checkpoint& ckpt);
Metrics evaluate(const Checkpoint& ckpt, const std::vector<Window>& windows);

void write_history_csv(const std::filesystem::path& path, const std::vector<EpochRecord>& history);

// ------------------------------------------------------------- ablations

enum class Predictor { PeriodDiffuser, FullyConnected };

std::string to_string(Predictor p);
Predictor parse_predictor(const std::string& text);

struct AblationArm {
  MixerKind mixer = MixerKind::Pam;
  Predictor predictor = Predictor::PeriodDiffuser;
  std::size_t groups = 0;  // 0 = grouping off, joint modeling

  std::string label() const;
};

struct AblationRow {
  AblationArm arm;
  Metrics test;
  double wall_seconds = 0.0;
  std::size_t steps = 0;
  std::uint64_t preprocessing_hash = 0;
};

struct AblationTable {
  std::vector<AblationRow> rows;
};

/// Throws std::invalid_argument for arms outside {PAM, SPAM, FULL} × {PD, FCN} × [0, 8].
void validate_arm(const AblationArm& arm);

/// Trains every arm from the same seed and preprocessing, sequentially.
AblationTable ablation_run(const SeriesFrame& corpus, const ModelConfig& base, const TrainConfig& train_cfg,
                           const DataConfig& data_cfg, const std::vector<AblationArm>& arms);

/// Columns: arm, groups, dif_blocks, mse, mae, wall_seconds, steps.
void write_ablation_csv(const std::filesystem::path& path, const AblationTable& table);
/// Plain-text report: published reference values (not reproduced) followed by the runs.
std::string ablation_report(const AblationTable& table);

}  // namespace periodnet
