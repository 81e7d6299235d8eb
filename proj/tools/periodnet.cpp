// periodnet command-line driver: synth, train, eval, forecast, gradcheck, ablate.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <stdexcept>

#include "periodnet/data.hpp"
#include "periodnet/ops.hpp"
#include "periodnet/run_config.hpp"
#include "periodnet/text.hpp"
#include "periodnet/train.hpp"

namespace fs = std::filesystem;
using namespace periodnet;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitVerify = 1;
constexpr int kExitUsage = 2;

/// Bad input from the user: config keys, flags, files, CSV contents.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> data, checkpoint, out, mixer;
  std::optional<std::size_t> groups, period, horizon, input_len;
  std::string corrupt;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "key=value config file");
  cmd->add_option("--seed", f.seed, "seed for initialization, shuffling and synthesis");
  cmd->add_option("--data", f.data, "input CSV");
  cmd->add_option("--checkpoint", f.checkpoint, "checkpoint path");
  cmd->add_option("--out", f.out, "output path");
  cmd->add_option("--mixer", f.mixer, "PAM, SPAM or FULL");
  cmd->add_option("--groups", f.groups, "IGM group count (0 = joint modeling)");
  cmd->add_option("--period", f.period, "base period length");
  cmd->add_option("--horizon", f.horizon, "forecast horizon T");
  cmd->add_option("--input-len", f.input_len, "input length L");
  cmd->add_option("overrides", f.overrides, "key=value overrides");
}

/// Defaults, then config file, then flags, then positional overrides.
RunSettings resolve(RunSettings s, const Flags& f, bool horizon_is_model_key = true) {
  if (!f.config.empty()) apply_config_file(s, f.config);
  if (f.seed) s.train.seed = *f.seed;
  if (f.data) s.data_path = *f.data;
  if (f.checkpoint) s.checkpoint_path = *f.checkpoint;
  if (f.out) s.out_path = *f.out;
  if (f.mixer) s.model.mixer = parse_mixer(*f.mixer);
  if (f.groups) s.model.groups = *f.groups;
  if (f.period) {
    s.model.base_period = *f.period;
    s.model.periods.clear();
  }
  if (f.horizon && horizon_is_model_key) s.model.horizon = *f.horizon;
  if (f.input_len) s.model.input_len = *f.input_len;
  if (!f.corrupt.empty()) s.gradcheck_corrupt = f.corrupt;
  apply_overrides(s, f.overrides);
  return s;
}

void echo(const std::string& command, const RunSettings& s) {
  std::cout << "# periodnet " << command << "\n" << format_settings(s) << "# ---\n";
}

const std::string& require_path(const std::string& path, const std::string& what) {
  if (path.empty()) throw UsageError("missing " + what + " path");
  if (!fs::exists(path)) throw UsageError(what + " not found: '" + path + "'");
  return path;
}

SeriesFrame load_data(const std::string& path) {
  require_path(path, "dataset");
  try {
    return load_csv(path);
  } catch (const ParseError& e) {
    throw UsageError(e.what());
  }
}

std::string metrics_text(const std::string& prefix, const Metrics& m) {
  return prefix + "_mse=" + text::format_double(m.mse) + " " + prefix + "_mae=" + text::format_double(m.mae);
}

int cmd_synth(const RunSettings& s) {
  if (s.out_path.empty()) throw UsageError("synth needs --out");
  const auto frame = synth_frame(s.synth_length, s.synth_specs(), s.train.seed);
  write_csv(s.out_path, frame);
  std::cout << "wrote " << frame.rows() << "x" << frame.cols() << " series to " << s.out_path << "\n";
  return kExitOk;
}

int cmd_train(RunSettings s) {
  const auto frame = load_data(s.data_path);
  s.model.variables = frame.cols();
  echo("train", s);
  const auto cfg = s.model.resolved();
  const auto data = prepare_dataset(frame, s.data, cfg.input_len, cfg.horizon);
  if (data.val.empty()) throw UsageError("validation split is shorter than input_len + horizon");

  PeriodNet model(cfg, s.train.seed);
  const auto result = train(model, data, s.train);
  save_checkpoint(s.checkpoint_path, make_checkpoint(model, data.stats, data.names));
  const std::string history = s.out_path.empty() ? s.checkpoint_path + ".history.csv" : s.out_path;
  write_history_csv(history, result.history);

  std::cout << "checkpoint " << s.checkpoint_path << "\nhistory " << history << "\n";
  std::cout << "final epochs=" << result.history.size() << " steps=" << result.steps
            << " best_epoch=" << result.best_epoch << " " << metrics_text("val", evaluate(model, data.val))
            << "\n";
  return kExitOk;
}

int cmd_eval(const RunSettings& s) {
  const auto ckpt = load_checkpoint(require_path(s.checkpoint_path, "checkpoint"));
  const auto frame = load_data(s.data_path);
  if (frame.names != ckpt.variable_names) throw UsageError("dataset variables differ from the checkpoint's");
  const auto model = instantiate(ckpt);
  const auto& cfg = model->config();

  const auto splits = split_chrono(frame, s.data.split);
  std::cout << "preprocessing uses the checkpoint's normalization statistics\n";
  for (const auto& [name, part] : {std::pair{"val", &splits.val}, std::pair{"test", &splits.test}}) {
    const auto windows = make_windows(normalize(*part, ckpt.stats), cfg.input_len, cfg.horizon, s.data.eval_stride);
    std::cout << metrics_text(name, evaluate(*model, windows)) << " windows=" << windows.size() << "\n";
  }
  return kExitOk;
}

int cmd_forecast(const RunSettings& s, std::optional<std::size_t> horizon) {
  const auto ckpt = load_checkpoint(require_path(s.checkpoint_path, "checkpoint"));
  const auto frame = load_data(s.data_path);
  const auto model = instantiate(ckpt);
  const auto& cfg = model->config();
  if (s.out_path.empty()) throw UsageError("forecast needs --out");
  if (horizon && *horizon != cfg.horizon) {
    throw UsageError("horizon " + std::to_string(*horizon) + " differs from the model's fixed horizon " +
                     std::to_string(cfg.horizon));
  }
  if (frame.names != ckpt.variable_names) {
    throw UsageError("input variables do not match the checkpoint (expected " +
                     text::join(ckpt.variable_names, ",") + ")");
  }
  if (frame.rows() < cfg.input_len) {
    throw UsageError("input has " + std::to_string(frame.rows()) + " rows; the model needs at least " +
                     std::to_string(cfg.input_len));
  }

  const auto recent = normalize(frame.slice_rows(frame.rows() - cfg.input_len, frame.rows()), ckpt.stats);
  const auto forecast = denormalize_values(model->forward(recent.values), ckpt.stats);

  SeriesFrame out;
  out.index_name = "step";
  out.names = ckpt.variable_names;
  for (std::size_t t = 1; t <= cfg.horizon; ++t) out.timestamps.push_back(std::to_string(t));
  out.values = forecast.detach();
  write_csv(s.out_path, out);
  std::cout << "wrote " << cfg.horizon << "x" << out.cols() << " forecast to " << s.out_path << "\n";
  return kExitOk;
}

int cmd_gradcheck(const RunSettings& s) {
  const auto cfg = s.model.resolved();
  PeriodNet model(cfg, s.train.seed);
  if (s.gradcheck_jitter > 0) model.jitter(s.gradcheck_jitter, s.train.seed + 1);

  std::mt19937_64 rng(s.train.seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> normal;
  auto draw = [&](Shape shape) {
    std::vector<double> v(shape_numel(shape));
    for (auto& x : v) x = normal(rng);
    return Tensor::from(shape, v);
  };
  const Tensor x = draw({cfg.input_len, cfg.variables});
  const Tensor y = draw({cfg.horizon, cfg.variables});
  auto loss = [&] {
    const auto err = ops::sub(model.forward(x), y);
    return ops::mean(ops::mul(err, err));
  };

  GradCheckOptions opt;
  opt.h = s.gradcheck_h;
  opt.tol = s.gradcheck_tol;
  if (!s.gradcheck_corrupt.empty()) {
    const auto& params = model.named_parameters();
    if (std::none_of(params.begin(), params.end(), [&](const NamedParam& p) { return p.name == s.gradcheck_corrupt; }))
      throw UsageError("unknown parameter '" + s.gradcheck_corrupt + "'");
    opt.corrupt_param = s.gradcheck_corrupt;
    opt.corrupt_factor = 2.0;
  }
  const auto report = finite_diff_check(loss, model.named_parameters(), opt);

  for (const auto& e : report.entries) {
    char line[160];
    std::snprintf(line, sizeof line, "%-40s n=%-5zu rel=%.3e abs=%.3e %s", e.name.c_str(), e.count, e.max_rel_error,
                  e.max_abs_error, e.passed ? "ok" : "FAIL");
    std::cout << line << "\n";
  }
  const auto& worst = report.worst();
  std::cout << (report.passed ? "gradcheck passed" : "gradcheck FAILED") << ": " << report.entries.size()
            << " parameters, worst " << worst.name << " rel=" << text::format_double(worst.max_rel_error)
            << " tol=" << text::format_double(report.tolerance) << "\n";
  return report.passed ? kExitOk : kExitVerify;
}

int cmd_ablate(const RunSettings& s) {
  if (s.out_path.empty()) throw UsageError("ablate needs --out");
  const auto corpus = s.data_path.empty() ? synth_frame(s.synth_length, s.synth_specs(), s.train.seed)
                                          : load_data(s.data_path);
  const auto table = ablation_run(corpus, s.model, s.train, s.data, s.ablation_arms());
  write_ablation_csv(s.out_path, table);
  const auto report = ablation_report(table);
  const std::string report_path = s.out_path + ".report.txt";
  std::ofstream(report_path) << report;
  std::cout << report << "\nresults " << s.out_path << "\nreport " << report_path << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PeriodNet forecasting: synthesize, train, evaluate, forecast, verify"};
  app.require_subcommand(1);
  Flags f;
  auto* synth = app.add_subcommand("synth", "write a synthetic sinusoidal series CSV");
  auto* trn = app.add_subcommand("train", "train on a CSV and write checkpoint + history");
  auto* evl = app.add_subcommand("eval", "report val/test MSE and MAE of a checkpoint");
  auto* fc = app.add_subcommand("forecast", "forecast the next T steps after the input CSV");
  auto* gc = app.add_subcommand("gradcheck", "finite-difference check of every parameter gradient");
  auto* abl = app.add_subcommand("ablate", "train ablation arms and write a results table");
  for (auto* cmd : {synth, trn, evl, fc, gc, abl}) add_common(cmd, f);
  gc->add_option("--corrupt", f.corrupt, "double the analytic gradient of this parameter (negative control)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (trn->parsed()) return cmd_train(resolve({}, f));

    RunSettings s;
    std::string name;
    if (synth->parsed()) name = "synth";
    if (evl->parsed()) name = "eval";
    if (fc->parsed()) name = "forecast";
    if (gc->parsed()) name = "gradcheck";
    if (abl->parsed()) name = "ablate";

    s = resolve(name == "gradcheck" ? tiny_settings() : RunSettings{}, f, name != "forecast");
    echo(name, s);
    if (name == "synth") return cmd_synth(s);
    if (name == "eval") return cmd_eval(s);
    if (name == "forecast") return cmd_forecast(s, f.horizon);
    if (name == "gradcheck") return cmd_gradcheck(s);
    return cmd_ablate(s);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitVerify;
  }
}
