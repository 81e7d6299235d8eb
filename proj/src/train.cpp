#include "periodnet/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "periodnet/ops.hpp"
#include "periodnet/text.hpp"

namespace periodnet {

void TrainConfig::validate() const {
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw std::invalid_argument("lr must be a finite non-negative number");
  if (batch_size == 0) throw std::invalid_argument("batch_size must be >= 1");
  if (max_epochs == 0) throw std::invalid_argument("max_epochs must be >= 1");
  if (patience == 0) throw std::invalid_argument("patience must be >= 1");
}

Dataset prepare_dataset(const SeriesFrame& frame, const DataConfig& data, std::size_t input_len,
                        std::size_t horizon) {
  auto splits = split_chrono(frame, data.split);
  Dataset ds;
  ds.names = frame.names;
  ds.stats = compute_norm_stats(splits.train);
  auto train = normalize(splits.train, ds.stats);
  auto val = normalize(splits.val, ds.stats);
  auto test = normalize(splits.test, ds.stats);
  ds.train = make_windows(train, input_len, horizon, data.stride);
  ds.val = make_windows(val, input_len, horizon, data.eval_stride);
  ds.test = make_windows(test, input_len, horizon, data.eval_stride);

  const std::vector<double> geometry = {static_cast<double>(input_len), static_cast<double>(horizon),
                                        static_cast<double>(data.stride), static_cast<double>(data.eval_stride)};
  auto h = fingerprint(geometry);
  h = fingerprint(train.values.data(), h);
  h = fingerprint(val.values.data(), h);
  h = fingerprint(test.values.data(), h);
  ds.preprocessing_hash = h;
  return ds;
}

bool EarlyStopper::observe(std::size_t epoch, double val_loss) {
  if (!best_epoch_ || val_loss < best_loss_) {
    best_epoch_ = epoch;
    best_loss_ = val_loss;
    stale_ = 0;
    return true;
  }
  ++stale_;
  return false;
}

DivergenceError::DivergenceError(std::size_t step, const std::string& detail)
    : std::runtime_error("training diverged at step " + std::to_string(step) + ": " + detail), step_(step) {}

Tensor window_loss(const PeriodNet& model, const Window& w) {
  auto diff = ops::sub(model.forward(w.x), w.y);
  return ops::mean(ops::mul(diff, diff));
}

Metrics evaluate(const PeriodNet& model, const std::vector<Window>& windows) {
  if (windows.empty()) throw std::invalid_argument("evaluate: no windows to score");
  Metrics m;
  for (const auto& w : windows) {
    auto pred = model.forward(w.x);
    m.mse += mse(pred, w.y);
    m.mae += mae(pred, w.y);
  }
  m.mse /= static_cast<double>(windows.size());
  m.mae /= static_cast<double>(windows.size());
  return m;
}

TrainResult train(PeriodNet& model, const Dataset& data, const TrainConfig& cfg,
                  const std::function<double(std::size_t)>& val_override) {
  cfg.validate();
  if (data.train.empty()) throw std::invalid_argument("train: dataset has no training windows");
  if (!val_override && data.val.empty()) throw std::invalid_argument("train: dataset has no validation windows");

  auto params = model.parameters();
  auto adam = make_adam_state(params, AdamOptions{.lr = cfg.lr});
  std::mt19937_64 rng(cfg.seed);
  EarlyStopper stopper(cfg.patience);
  std::vector<std::vector<double>> best = model.snapshot();

  TrainResult result;
  std::vector<std::size_t> order(data.train.size());
  std::vector<double> window_losses(data.train.size());
  std::vector<std::uint8_t> seen(data.train.size());

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::fill(seen.begin(), seen.end(), 0);
    bool budget_hit = false;

    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      if (cfg.max_steps && result.steps >= cfg.max_steps) {
        budget_hit = true;
        break;
      }
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const double inv_batch = 1.0 / static_cast<double>(end - start);
      for (auto& p : params) p.zero_grad();
      try {
        for (std::size_t b = start; b < end; ++b) {
          const auto idx = order[b];
          auto loss = window_loss(model, data.train[idx]);
          window_losses[idx] = loss.item();
          seen[idx] = 1;
          backward(ops::scale(loss, inv_batch));
        }
        adam_step(params, adam);
        for (const auto& p : params) {
          for (double v : p.data()) {
            if (!std::isfinite(v)) throw NumericError("parameter update produced a non-finite value");
          }
        }
      } catch (const NumericError& e) {
        throw DivergenceError(result.steps + 1, e.what());
      }
      ++result.steps;
    }

    double train_total = 0.0;
    std::size_t counted = 0;
    for (std::size_t i = 0; i < window_losses.size(); ++i) {
      if (seen[i]) {
        train_total += window_losses[i];
        ++counted;
      }
    }
    if (counted == 0) break;

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = train_total / static_cast<double>(counted);
    rec.val_loss = val_override ? val_override(epoch) : evaluate(model, data.val).mse;
    result.history.push_back(rec);

    if (stopper.observe(epoch, rec.val_loss)) best = model.snapshot();
    if (stopper.should_stop() || budget_hit || (cfg.max_steps && result.steps >= cfg.max_steps)) break;
  }

  model.restore(best);
  result.best_epoch = stopper.best_epoch().value_or(0);
  result.best_val = stopper.best_loss();
  return result;
}

Tensor baseline_repeat_last(const Tensor& x, std::size_t horizon) {
  if (x.rank() != 2 || x.dim(0) == 0) throw DimensionError("baseline_repeat_last: expected L×C input");
  if (horizon == 0) throw std::invalid_argument("baseline_repeat_last: horizon must be >= 1");
  const std::size_t c = x.dim(1), last = x.dim(0) - 1;
  std::vector<double> out(horizon * c);
  for (std::size_t t = 0; t < horizon; ++t)
    for (std::size_t j = 0; j < c; ++j) out[t * c + j] = x.at(last, j);
  return Tensor::from({horizon, c}, std::move(out));
}

Metrics evaluate_repeat_last(const std::vector<Window>& windows) {
  if (windows.empty()) throw std::invalid_argument("evaluate_repeat_last: no windows");
  Metrics m;
  for (const auto& w : windows) {
    auto pred = baseline_repeat_last(w.x, w.y.dim(0));
    m.mse += mse(pred, w.y);
    m.mae += mae(pred, w.y);
  }
  m.mse /= static_cast<double>(windows.size());
  m.mae /= static_cast<double>(windows.size());
  return m;
}

void write_history_csv(const std::filesystem::path& path, const std::vector<EpochRecord>& history) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << "epoch,train_loss,val_loss\n";
  for (const auto& r : history) {
    out << r.epoch << ',' << text::format_double(r.train_loss) << ',' << text::format_double(r.val_loss) << '\n';
  }
}

}  // namespace periodnet
