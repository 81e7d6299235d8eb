#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "periodnet/ops.hpp"
#include "periodnet/run_config.hpp"
#include "periodnet/train.hpp"
#include "support.hpp"

using namespace periodnet;
using testing::bit_equal;
using testing::random_tensor;

namespace fs = std::filesystem;

namespace {

ModelConfig small_config(std::size_t variables = 1) {
  ModelConfig cfg;
  cfg.variables = variables;
  cfg.input_len = 16;
  cfg.horizon = 8;
  cfg.d_model = 4;
  cfg.heads = 2;
  cfg.periods = {4, 4};
  cfg.router_len = 2;
  cfg.ffn_width = 8;
  return cfg.resolved();
}

SeriesFrame corpus(std::size_t n = 200, std::size_t variables = 1, double noise = 0.0) {
  std::vector<SynthSpec> specs;
  for (std::size_t j = 0; j < variables; ++j) {
    SynthSpec s;
    s.components = {{8, 1.0, 0.3 * static_cast<double>(j)}, {24, 0.5, 0.0}};
    s.noise_std = noise;
    s.name = "v" + std::to_string(j);
    specs.push_back(s);
  }
  return synth_frame(n, specs, 5);
}

std::vector<double> flat_params(const PeriodNet& m) {
  std::vector<double> out;
  for (const auto& v : m.snapshot()) out.insert(out.end(), v.begin(), v.end());
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

fs::path temp_path(const std::string& name) {
  auto dir = fs::temp_directory_path() / "periodnet_test_train";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("train config validation") {
  TrainConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.lr = -1e-3;
  CHECK_THROWS(cfg.validate());
  cfg = {};
  cfg.patience = 0;
  CHECK_THROWS(cfg.validate());
  cfg = {};
  cfg.batch_size = 0;
  CHECK_THROWS(cfg.validate());
}

TEST_CASE("lr = 0 leaves parameters unchanged and history flat") {
  auto data = prepare_dataset(corpus(), {}, 16, 8);
  PeriodNet model(small_config(), 1);
  const auto before = flat_params(model);
  TrainConfig cfg;
  cfg.lr = 0.0;
  cfg.max_epochs = 3;
  cfg.patience = 5;
  auto result = train(model, data, cfg);
  CHECK(flat_params(model) == before);
  REQUIRE(result.history.size() == 3);
  for (const auto& r : result.history) {
    CHECK(r.train_loss == result.history[0].train_loss);
    CHECK(r.val_loss == result.history[0].val_loss);
  }
}

TEST_CASE("single window: 200 steps reduce the training loss") {
  auto full = prepare_dataset(corpus(), {}, 16, 8);
  Dataset one;
  one.train = {full.train[3]};
  PeriodNet model(small_config(), 2);
  const double initial = window_loss(model, one.train[0]).item();
  TrainConfig cfg;
  cfg.lr = 1e-2;
  cfg.batch_size = 1;
  cfg.max_epochs = 200;
  auto result = train(model, one, cfg, [](std::size_t epoch) { return 1.0 / static_cast<double>(epoch); });
  CHECK(result.steps == 200);
  const double final_loss = window_loss(model, one.train[0]).item();
  CHECK(final_loss < initial);
  CHECK(result.history.back().train_loss < result.history.front().train_loss);
}

TEST_CASE("training is deterministic under a fixed seed") {
  auto data = prepare_dataset(corpus(), {}, 16, 8);
  TrainConfig cfg;
  cfg.max_epochs = 2;
  cfg.seed = 17;
  auto run = [&] {
    PeriodNet model(small_config(), cfg.seed);
    auto r = train(model, data, cfg);
    return std::pair{r, encode_checkpoint(make_checkpoint(model, data.stats, data.names))};
  };
  auto [ra, ca] = run();
  auto [rb, cb] = run();
  CHECK(ca == cb);
  REQUIRE(ra.history.size() == rb.history.size());
  for (std::size_t i = 0; i < ra.history.size(); ++i) {
    CHECK(ra.history[i].train_loss == rb.history[i].train_loss);
    CHECK(ra.history[i].val_loss == rb.history[i].val_loss);
  }
  cfg.seed = 18;
  CHECK(run().second != ca);
}

TEST_CASE("step budget") {
  auto data = prepare_dataset(corpus(), {}, 16, 8);
  PeriodNet model(small_config(), 3);
  TrainConfig cfg;
  cfg.max_steps = 5;
  cfg.batch_size = 4;
  auto r = train(model, data, cfg);
  CHECK(r.steps == 5);
  CHECK(r.history.size() == 1);
}

TEST_CASE("early stopping restores the strictly best epoch") {
  auto data = prepare_dataset(corpus(), {}, 16, 8);
  const std::vector<double> curve = {1.0, 0.8, 0.9, 0.7, 0.7, 0.75, 0.71, 0.5, 0.4};
  auto scripted = [&](std::size_t epoch) { return curve[epoch - 1]; };
  TrainConfig cfg;
  cfg.patience = 3;
  cfg.max_epochs = 9;
  cfg.batch_size = 32;

  PeriodNet model(small_config(), 4);
  auto r = train(model, data, cfg, scripted);
  CHECK(r.history.size() == 7);
  CHECK(r.best_epoch == 4);
  CHECK(r.best_val == 0.7);

  PeriodNet reference(small_config(), 4);
  TrainConfig four = cfg;
  four.max_epochs = 4;
  train(reference, data, four, scripted);
  CHECK(flat_params(model) == flat_params(reference));

  EarlyStopper stopper(2);
  CHECK(stopper.observe(1, 1.0));
  CHECK_FALSE(stopper.observe(2, 1.0));
  CHECK_FALSE(stopper.should_stop());
  CHECK_FALSE(stopper.observe(3, 1.5));
  CHECK(stopper.should_stop());
  CHECK(*stopper.best_epoch() == 1);
}

TEST_CASE("divergence reports the step") {
  auto data = prepare_dataset(corpus(), {}, 16, 8);
  PeriodNet model(small_config(), 5);
  TrainConfig cfg;
  cfg.lr = 1e300;
  cfg.batch_size = 4;
  try {
    train(model, data, cfg);
    FAIL("expected divergence");
  } catch (const DivergenceError& e) {
    CHECK(e.step() >= 1);
    CHECK(std::string(e.what()).find("step " + std::to_string(e.step())) != std::string::npos);
  }
}

TEST_CASE("evaluate") {
  auto data = prepare_dataset(corpus(300), {}, 16, 8);
  PeriodNet model(small_config(), 6);

  std::vector<Window> own;
  for (std::size_t i = 0; i < 3; ++i) own.push_back({data.test[i].x, model.forward(data.test[i].x).detach()});
  auto perfect = evaluate(model, own);
  CHECK(perfect.mse == 0.0);
  CHECK(perfect.mae == 0.0);

  const auto& w = data.test[5];
  auto pred = model.forward(w.x);
  double se = 0.0, ae = 0.0;
  for (std::size_t i = 0; i < pred.numel(); ++i) {
    se += (pred[i] - w.y[i]) * (pred[i] - w.y[i]);
    ae += std::abs(pred[i] - w.y[i]);
  }
  auto single = evaluate(model, {w});
  CHECK(std::abs(single.mse - se / 8.0) < 1e-12);
  CHECK(std::abs(single.mae - ae / 8.0) < 1e-12);

  PeriodNet zero(small_config(), 6);
  for (auto name : {"readout.weight", "readout.bias"})
    for (auto& v : zero.parameter(name).mutable_data()) v = 0.0;
  auto on_train = evaluate(zero, data.train);
  CHECK(on_train.mse == doctest::Approx(1.0).epsilon(0.1));

  CHECK_THROWS(evaluate(model, std::vector<Window>{}));
}

TEST_CASE("repeat-last baseline") {
  auto flat = Tensor::full({10, 2}, 3.5);
  auto out = baseline_repeat_last(flat, 4);
  CHECK(out.shape() == Shape{4, 2});
  CHECK(mse(out, Tensor::full({4, 2}, 3.5)) == 0.0);

  const double s = 0.3;
  for (std::size_t horizon : {1, 5, 12}) {
    std::vector<double> xs(8), ys(horizon);
    for (std::size_t t = 0; t < 8; ++t) xs[t] = s * static_cast<double>(t);
    for (std::size_t k = 1; k <= horizon; ++k) ys[k - 1] = s * static_cast<double>(7 + k);
    Window w{Tensor::from({8, 1}, xs), Tensor::from({horizon, 1}, ys)};
    const double n = static_cast<double>(horizon);
    const double closed = s * s * (n + 1) * (2 * n + 1) / 6.0;
    CHECK(std::abs(evaluate_repeat_last({w}).mse - closed) < 1e-12);
  }
}

TEST_CASE("checkpoint round trip") {
  auto data = prepare_dataset(corpus(200, 2), {}, 16, 8);
  auto cfg = small_config(2);
  cfg.groups = 2;
  cfg.group_hidden = 0;
  PeriodNet model(cfg.resolved(), 7);
  TrainConfig tc;
  tc.max_epochs = 1;
  train(model, data, tc);

  auto path = temp_path("model.ckpt");
  save_checkpoint(path, make_checkpoint(model, data.stats, data.names));
  auto loaded = load_checkpoint(path);
  auto path2 = temp_path("model2.ckpt");
  save_checkpoint(path2, loaded);
  CHECK(slurp(path) == slurp(path2));

  CHECK(loaded.variable_names == data.names);
  CHECK(loaded.stats.mean == data.stats.mean);
  CHECK(loaded.stats.stddev == data.stats.stddev);
  CHECK(loaded.config.entries() == model.config().entries());
  auto a = evaluate(model, data.test);
  auto b = evaluate(loaded, data.test);
  CHECK(a.mse == b.mse);
  CHECK(a.mae == b.mae);

  const auto bytes = slurp(path);
  CHECK(bytes.substr(0, 8) == "PNETCKPT");
  auto wrong_version = bytes;
  wrong_version[8] = 2;
  CHECK_THROWS_WITH(decode_checkpoint(wrong_version), doctest::Contains("version"));
  CHECK_THROWS(decode_checkpoint("NOTACKPT" + bytes.substr(8)));
  CHECK_THROWS(decode_checkpoint(bytes.substr(0, bytes.size() - 8)));

  auto reshaped = make_checkpoint(model, data.stats, data.names);
  reshaped.tensors[0].second = Tensor::zeros({2, 2});
  CHECK_THROWS_AS(decode_checkpoint(encode_checkpoint(reshaped)), DimensionError);

  auto mismatched = make_checkpoint(model, data.stats, data.names);
  mismatched.config.d_model = 8;
  CHECK_THROWS(decode_checkpoint(encode_checkpoint(mismatched)));
}

TEST_CASE("history csv") {
  auto path = temp_path("history.csv");
  write_history_csv(path, {{1, 0.5, 0.25}, {2, 0.125, 0.1}});
  CHECK(slurp(path) == "epoch,train_loss,val_loss\n1,0.5,0.25\n2,0.125,0.1\n");
}

TEST_CASE("ablation harness") {
  auto frame = corpus(160, 2);
  auto base = small_config(2);
  TrainConfig tc;
  tc.max_steps = 3;
  tc.batch_size = 8;
  DataConfig dc;
  dc.eval_stride = 4;

  std::vector<AblationArm> arms = {{MixerKind::Pam, Predictor::PeriodDiffuser, 2},
                                   {MixerKind::Spam, Predictor::FullyConnected, 0},
                                   {MixerKind::Full, Predictor::PeriodDiffuser, 1}};
  auto table = ablation_run(frame, base, tc, dc, arms);
  REQUIRE(table.rows.size() == 3);
  for (const auto& r : table.rows) {
    CHECK(r.preprocessing_hash == table.rows[0].preprocessing_hash);
    CHECK(std::isfinite(r.test.mse));
    CHECK(std::isfinite(r.test.mae));
    CHECK(r.steps == 3);
  }
  auto again = ablation_run(frame, base, tc, dc, {arms[1]});
  CHECK(again.rows[0].test.mse == table.rows[1].test.mse);

  auto csv = temp_path("ablation.csv");
  write_ablation_csv(csv, table);
  auto back = read_table(csv);
  CHECK(back.index_name == "arm");
  CHECK(back.timestamps[1] == "mixer=SPAM;predictor=FCN;groups=0");
  CHECK(back.names == std::vector<std::string>{"groups", "dif_blocks", "mse", "mae", "wall_seconds", "steps"});
  CHECK(back.at(1, 1) == 0.0);
  CHECK(back.at(0, 2) == table.rows[0].test.mse);

  auto report = ablation_report(table);
  CHECK(report.find("NOT reproduced") != std::string::npos);
  CHECK(report.find("PAM  0.054") != std::string::npos);
  CHECK(report.find("FAM  0.058") != std::string::npos);

  CHECK_THROWS_AS(validate_arm({MixerKind::Pam, Predictor::PeriodDiffuser, 9}), std::invalid_argument);
  CHECK_THROWS_AS(parse_predictor("GSD"), std::invalid_argument);
}

TEST_CASE("run settings") {
  RunSettings s;
  apply_overrides(s, {"lr=0.01", "mixer=spam", "ablate_groups=0,1,2,4,8", "split=7:1:2"});
  CHECK(s.train.lr == 0.01);
  CHECK(s.model.mixer == MixerKind::Spam);
  CHECK(s.data.split.str() == "7:1:2");
  auto arms = s.ablation_arms();
  CHECK(arms.size() == 2 * 5);
  CHECK_THROWS_AS(apply_overrides(s, {"nope=1"}), std::invalid_argument);
  CHECK_THROWS_AS(apply_overrides(s, {"lr"}), std::invalid_argument);

  auto path = temp_path("run.conf");
  std::ofstream(path) << "# comment\nd_model = 8\nseed=9 # trailing\n\nbogus=1\n";
  RunSettings t;
  CHECK_THROWS_WITH(apply_config_file(t, path), doctest::Contains(":5:"));
  CHECK(t.model.d_model == 8);
  CHECK(t.train.seed == 9);

  auto specs = RunSettings{}.synth_specs();
  REQUIRE(specs.size() == 1);
  CHECK(specs[0].name == "value");
  RunSettings multi;
  multi.synth_components = "8:1;12:1:0.5";
  CHECK(multi.synth_specs().size() == 2);
}
