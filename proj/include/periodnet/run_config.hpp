#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "periodnet/data.hpp"
#include "periodnet/model.hpp"
#include "periodnet/optim.hpp"
#include "periodnet/train.hpp"

namespace periodnet {

/**
 * Everything a CLI run can be configured with, as one flat key=value
 * namespace. Config files use the same keys, one `key=value` per line,
 * `#` starts a comment. Later assignments override earlier ones.
 */
struct RunSettings {
  ModelConfig model;
  TrainConfig train;
  DataConfig data;

  std::string data_path;
  std::string checkpoint_path = "periodnet.ckpt";
  std::string out_path;

  std::size_t synth_length = 2000;
  /// Components per variable: "p:a[:phase],..." with ';' between variables.
  std::string synth_components = "8:1:0,24:0.5:0";
  double synth_trend = 0.0;
  double synth_noise = 0.0;

  std::string ablate_mixers = "PAM,SPAM";
  std::string ablate_predictors = "PD";
  std::string ablate_groups = "";

  double gradcheck_h = 1e-5;
  double gradcheck_tol = 1e-4;
  /// Noise added to the initial parameters before checking (0 = check at init).
  double gradcheck_jitter = 0.5;
  std::string gradcheck_corrupt;

  void set(const std::string& key, const std::string& value);
  /// Effective configuration in a stable order, for echoing.
  std::vector<std::pair<std::string, std::string>> entries() const;

  std::vector<SynthSpec> synth_specs() const;
  std::vector<AblationArm> ablation_arms() const;
};

/// Settings for the tiny gradient-check model (C=2, L=12, P=(3,3), D=4, 2 heads, G=2, T=6).
RunSettings tiny_settings();

/// Reads `key=value` lines; unknown keys and malformed lines throw std::invalid_argument.
void apply_config_file(RunSettings& settings, const std::filesystem::path& path);
/// Applies "key=value" overrides.
void apply_overrides(RunSettings& settings, const std::vector<std::string>& overrides);

std::string format_settings(const RunSettings& settings);

}  // namespace periodnet
