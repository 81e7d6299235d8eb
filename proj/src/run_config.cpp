#include "periodnet/run_config.hpp"

#include <fstream>
#include <sstream>

#include "periodnet/text.hpp"

namespace periodnet {

void RunSettings::set(const std::string& raw_key, const std::string& value) {
  const auto key = text::trim(raw_key);
  if (ModelConfig::is_key(key)) return model.set(key, value);

  if (key == "lr") train.lr = text::parse_double(value, key);
  else if (key == "batch_size") train.batch_size = text::parse_size(value, key);
  else if (key == "max_epochs") train.max_epochs = text::parse_size(value, key);
  else if (key == "max_steps") train.max_steps = text::parse_size(value, key);
  else if (key == "patience") train.patience = text::parse_size(value, key);
  else if (key == "seed") train.seed = text::parse_u64(value, key);
  else if (key == "split") data.split = SplitSpec::parse(text::trim(value));
  else if (key == "stride") data.stride = text::parse_size(value, key);
  else if (key == "eval_stride") data.eval_stride = text::parse_size(value, key);
  else if (key == "data") data_path = text::trim(value);
  else if (key == "checkpoint") checkpoint_path = text::trim(value);
  else if (key == "out") out_path = text::trim(value);
  else if (key == "synth_length") synth_length = text::parse_size(value, key);
  else if (key == "synth_components") synth_components = text::trim(value);
  else if (key == "synth_trend") synth_trend = text::parse_double(value, key);
  else if (key == "synth_noise") synth_noise = text::parse_double(value, key);
  else if (key == "ablate_mixers") ablate_mixers = text::trim(value);
  else if (key == "ablate_predictors") ablate_predictors = text::trim(value);
  else if (key == "ablate_groups") ablate_groups = text::trim(value);
  else if (key == "gradcheck_h") gradcheck_h = text::parse_double(value, key);
  else if (key == "gradcheck_tol") gradcheck_tol = text::parse_double(value, key);
  else if (key == "gradcheck_jitter") gradcheck_jitter = text::parse_double(value, key);
  else if (key == "gradcheck_corrupt") gradcheck_corrupt = text::trim(value);
  else throw std::invalid_argument("unknown config key '" + key + "'");
}

std::vector<std::pair<std::string, std::string>> RunSettings::entries() const {
  auto out = model.entries();
  const std::vector<std::pair<std::string, std::string>> rest = {
      {"lr", text::format_double(train.lr)},
      {"batch_size", std::to_string(train.batch_size)},
      {"max_epochs", std::to_string(train.max_epochs)},
      {"max_steps", std::to_string(train.max_steps)},
      {"patience", std::to_string(train.patience)},
      {"seed", std::to_string(train.seed)},
      {"split", data.split.str()},
      {"stride", std::to_string(data.stride)},
      {"eval_stride", std::to_string(data.eval_stride)},
      {"data", data_path},
      {"checkpoint", checkpoint_path},
      {"out", out_path},
      {"synth_length", std::to_string(synth_length)},
      {"synth_components", synth_components},
      {"synth_trend", text::format_double(synth_trend)},
      {"synth_noise", text::format_double(synth_noise)},
      {"ablate_mixers", ablate_mixers},
      {"ablate_predictors", ablate_predictors},
      {"ablate_groups", ablate_groups},
      {"gradcheck_h", text::format_double(gradcheck_h)},
      {"gradcheck_tol", text::format_double(gradcheck_tol)},
      {"gradcheck_jitter", text::format_double(gradcheck_jitter)},
      {"gradcheck_corrupt", gradcheck_corrupt},
  };
  out.insert(out.end(), rest.begin(), rest.end());
  return out;
}

std::vector<SynthSpec> RunSettings::synth_specs() const {
  std::vector<SynthSpec> specs;
  const auto per_variable = text::split(synth_components, ';');
  for (std::size_t j = 0; j < per_variable.size(); ++j) {
    SynthSpec s;
    s.components = parse_components(per_variable[j]);
    s.trend_slope = synth_trend;
    s.noise_std = synth_noise;
    s.name = per_variable.size() == 1 ? "value" : "v" + std::to_string(j);
    specs.push_back(std::move(s));
  }
  return specs;
}

std::vector<AblationArm> RunSettings::ablation_arms() const {
  std::vector<MixerKind> mixers;
  for (const auto& m : text::split(ablate_mixers, ',')) mixers.push_back(parse_mixer(text::trim(m)));
  std::vector<Predictor> predictors;
  for (const auto& p : text::split(ablate_predictors, ',')) predictors.push_back(parse_predictor(text::trim(p)));
  auto groups = text::parse_size_list(ablate_groups, "ablate_groups");
  if (groups.empty()) groups.push_back(model.groups);

  std::vector<AblationArm> arms;
  for (auto m : mixers)
    for (auto p : predictors)
      for (auto g : groups) arms.push_back({m, p, g});
  return arms;
}

RunSettings tiny_settings() {
  RunSettings s;
  s.model.variables = 2;
  s.model.input_len = 12;
  s.model.horizon = 6;
  s.model.d_model = 4;
  s.model.heads = 2;
  s.model.periods = {3, 3};
  s.model.router_len = 2;
  s.model.groups = 2;
  s.model.enc_blocks = 2;
  s.model.dif_blocks = 1;
  s.model.ffn_width = 8;
  return s;
}

void apply_config_file(RunSettings& settings, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file '" + path.string() + "'");
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (text::trim(line).empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument(path.string() + ":" + std::to_string(line_no) + ": expected key=value");
    }
    try {
      settings.set(line.substr(0, eq), line.substr(eq + 1));
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

void apply_overrides(RunSettings& settings, const std::vector<std::string>& overrides) {
  for (const auto& o : overrides) {
    auto eq = o.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("override '" + o + "' is not key=value");
    settings.set(o.substr(0, eq), o.substr(eq + 1));
  }
}

std::string format_settings(const RunSettings& settings) {
  std::ostringstream os;
  for (const auto& [k, v] : settings.entries()) os << k << "=" << v << "\n";
  return os.str();
}

}  // namespace periodnet
