#include "periodnet/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <stdexcept>

#include "periodnet/ops.hpp"
#include "periodnet/text.hpp"

namespace periodnet {

// ---------------------------------------------------------------- config

ModelConfig ModelConfig::resolved() const {
  ModelConfig out = *this;
  if (out.periods.empty()) {
    std::size_t p = out.base_period;
    for (std::size_t i = 0; i < out.enc_blocks; ++i, p *= 2) out.periods.push_back(p);
  }
  if (out.group_hidden == 0) out.group_hidden = std::max(out.variables, 2 * out.groups);
  out.validate();
  return out;
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("invalid model config: " + msg); };
  if (variables == 0) fail("variables must be >= 1");
  if (input_len == 0) fail("input_len must be >= 1");
  if (horizon == 0) fail("horizon must be >= 1");
  if (heads == 0 || d_model == 0 || d_model % heads != 0) fail("d_model must be a positive multiple of heads");
  if (enc_blocks == 0) fail("enc_blocks must be >= 1");
  if (dif_blocks + 1 > enc_blocks) fail("dif_blocks must be <= enc_blocks - 1");
  if (periods.size() != enc_blocks) fail("periods must list one period per encoder block");
  for (auto p : periods) {
    if (p < 2) fail("every period must be >= 2");
  }
  if (router_len == 0) fail("router_len must be >= 1");
  if (ffn_width == 0) fail("ffn_width must be >= 1");
  if (groups > 0 && group_hidden == 0) fail("group_hidden must be >= 1 when grouping is enabled");
}

std::vector<std::pair<std::string, std::string>> ModelConfig::entries() const {
  return {
      {"variables", std::to_string(variables)},
      {"input_len", std::to_string(input_len)},
      {"horizon", std::to_string(horizon)},
      {"d_model", std::to_string(d_model)},
      {"heads", std::to_string(heads)},
      {"base_period", std::to_string(base_period)},
      {"periods", text::join_sizes(periods)},
      {"router_len", std::to_string(router_len)},
      {"groups", std::to_string(groups)},
      {"group_hidden", std::to_string(group_hidden)},
      {"enc_blocks", std::to_string(enc_blocks)},
      {"dif_blocks", std::to_string(dif_blocks)},
      {"ffn_width", std::to_string(ffn_width)},
      {"mixer", to_string(mixer)},
      {"activation", to_string(activation)},
      {"pos_enc", positional_encoding ? "true" : "false"},
  };
}

bool ModelConfig::is_key(const std::string& key) {
  static const std::set<std::string> keys = {"variables", "input_len",  "horizon",      "d_model",    "heads",
                                             "base_period", "periods",  "router_len",   "groups",     "group_hidden",
                                             "enc_blocks", "dif_blocks", "ffn_width",   "mixer",      "activation",
                                             "pos_enc"};
  return keys.count(key) > 0;
}

void ModelConfig::set(const std::string& key, const std::string& value) {
  if (key == "variables") variables = text::parse_size(value, key);
  else if (key == "input_len") input_len = text::parse_size(value, key);
  else if (key == "horizon") horizon = text::parse_size(value, key);
  else if (key == "d_model") d_model = text::parse_size(value, key);
  else if (key == "heads") heads = text::parse_size(value, key);
  else if (key == "base_period") base_period = text::parse_size(value, key);
  else if (key == "periods") periods = text::parse_size_list(value, key);
  else if (key == "router_len") router_len = text::parse_size(value, key);
  else if (key == "groups") groups = text::parse_size(value, key);
  else if (key == "group_hidden") group_hidden = text::parse_size(value, key);
  else if (key == "enc_blocks") enc_blocks = text::parse_size(value, key);
  else if (key == "dif_blocks") dif_blocks = text::parse_size(value, key);
  else if (key == "ffn_width") ffn_width = text::parse_size(value, key);
  else if (key == "mixer") mixer = parse_mixer(text::trim(value));
  else if (key == "activation") activation = parse_activation(text::trim(value));
  else if (key == "pos_enc") positional_encoding = text::parse_bool(value, key);
  else throw std::invalid_argument("unknown model config key '" + key + "'");
}

// ---------------------------------------------------------------- pieces

Tensor positional_encoding(std::size_t length, std::size_t d_model) {
  std::vector<double> pe(length * d_model);
  for (std::size_t t = 0; t < length; ++t) {
    for (std::size_t i = 0; i < d_model; ++i) {
      const double freq = std::pow(10000.0, -static_cast<double>(i - i % 2) / static_cast<double>(d_model));
      const double angle = static_cast<double>(t) * freq;
      pe[t * d_model + i] = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  }
  return Tensor::from({length, d_model}, std::move(pe));
}

Tensor embed(const Tensor& x, const Linear& value_embedding, bool add_position) {
  if (x.rank() != 2) throw DimensionError("embed: expected L×C input, got " + shape_str(x.shape()));
  if (value_embedding.weight.dim(0) != 1) throw DimensionError("embed: value embedding must map 1 → D");
  const std::size_t length = x.dim(0), variables = x.dim(1);
  const std::size_t d_model = value_embedding.weight.dim(1);
  std::optional<Tensor> pe;
  if (add_position) pe = positional_encoding(length, d_model);
  std::vector<Tensor> streams;
  streams.reserve(variables);
  for (std::size_t c = 0; c < variables; ++c) {
    auto column = variables == 1 ? x : ops::slice(x, 1, c, c + 1);
    auto z = value_embedding(column);
    if (pe) z = ops::add(z, *pe);
    streams.push_back(z);
  }
  return stack_streams(streams);
}

Padded pad_to_period(const Tensor& z, std::size_t period) {
  if (period < 2) throw std::invalid_argument("pad_to_period: period must be >= 2");
  if (z.rank() != 2) throw DimensionError("pad_to_period: expected L×D input");
  const std::size_t length = z.dim(0);
  const std::size_t padded = (length + period - 1) / period * period;
  if (padded == length) return {z, length};
  std::vector<std::size_t> rows(padded - length, 0);
  for (std::size_t t = 0; t < length; ++t) rows.push_back(t);
  return {ops::gather_rows(z, rows), length};
}

Tensor trim_padding(const Tensor& z, std::size_t original_len) {
  if (original_len > z.dim(0) || original_len == 0) throw DimensionError("trim_padding: invalid original length");
  if (original_len == z.dim(0)) return z;
  return ops::slice(z, 0, z.dim(0) - original_len, z.dim(0));
}

Tensor padded_mixer(const Tensor& z, const MhaParams& params, std::size_t period, MixerKind mode) {
  auto padded = pad_to_period(z, period);
  auto mixed = mixer_forward(padded.value, params, PamConfig{period, mode});
  return trim_padding(mixed, padded.original_len);
}

namespace {

Tensor mean_of(const std::vector<Tensor>& streams) {
  if (streams.size() == 1) return streams.front();
  Tensor acc = streams.front();
  for (std::size_t i = 1; i < streams.size(); ++i) acc = ops::add(acc, streams[i]);
  return ops::scale(acc, 1.0 / static_cast<double>(streams.size()));
}

}  // namespace

Tensor encoder_block(const Tensor& x, const EncoderBlockParams& block, const ModelConfig& cfg) {
  auto inputs = unstack_streams(x);
  const std::size_t variables = inputs.size();

  std::vector<Tensor> normed;
  normed.reserve(variables);
  for (const auto& s : inputs) normed.push_back(block.mix_norm(s));

  // Token mixing on grouped streams; parameters shared across groups.
  std::vector<Tensor> mixed;
  if (block.igm) {
    auto grouped = unstack_streams(regroup(stack_streams(normed), *block.igm, cfg.activation));
    std::vector<Tensor> group_out;
    group_out.reserve(grouped.size());
    for (const auto& g : grouped) group_out.push_back(padded_mixer(g, block.mixer, block.period, cfg.mixer));
    mixed = unstack_streams(ungroup(stack_streams(group_out), *block.igm, cfg.activation));
  } else {
    auto joint = padded_mixer(mean_of(normed), block.mixer, block.period, cfg.mixer);
    mixed.assign(variables, joint);
  }

  std::vector<Tensor> outputs;
  outputs.reserve(variables);
  for (std::size_t c = 0; c < variables; ++c) {
    auto y = ops::add(inputs[c], mixed[c]);
    auto routed = ops::add(y, router_forward(block.route_norm(y), block.router));
    outputs.push_back(block.out_norm(ops::add(routed, block.ffn(routed, cfg.activation))));
  }
  return stack_streams(outputs);
}

Tensor fc_predict(const Tensor& h_last, const Linear& predictor) {
  if (h_last.rank() != 2 || h_last.dim(0) != predictor.weight.dim(0)) {
    throw DimensionError("fc_predict: encoder state " + shape_str(h_last.shape()) + " does not match predictor " +
                         shape_str(predictor.weight.shape()));
  }
  return ops::transpose(predictor(ops::transpose(h_last)));
}

Tensor diffuser_block(const Tensor& z_in, const Tensor& h_cross, const DiffuserBlockParams& block,
                      const ModelConfig& cfg) {
  auto z_d = ops::add(z_in, padded_mixer(block.self_norm(z_in), block.self_mixer, block.period, cfg.mixer));
  auto z_c = mha(block.cross_norm(z_d), h_cross, h_cross, block.cross);
  auto z = ops::add(z_d, z_c);
  return block.out_norm(ops::add(z, block.ffn(z, cfg.activation)));
}

// ---------------------------------------------------------------- model

PeriodNet::PeriodNet(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg.resolved()) {
  std::mt19937_64 rng(seed);
  const std::size_t d = cfg_.d_model;

  embedding_ = Linear::init(1, d, rng);
  add("embed", embedding_);

  for (std::size_t i = 0; i < cfg_.enc_blocks; ++i) {
    EncoderBlockParams b;
    b.period = cfg_.periods[i];
    b.mix_norm = LayerNormParams::init(d);
    if (cfg_.groups > 0) b.igm = IgmParams::init(cfg_.variables, cfg_.groups, cfg_.group_hidden, rng);
    b.mixer = MhaParams::init(d, cfg_.heads, rng);
    b.route_norm = LayerNormParams::init(d);
    b.router = RouterParams::init(cfg_.router_len, d, cfg_.heads, rng);
    b.ffn = FeedForward::init(d, cfg_.ffn_width, rng);
    b.out_norm = LayerNormParams::init(d);

    const std::string p = "enc" + std::to_string(i) + ".";
    add(p + "mix_norm", b.mix_norm);
    if (b.igm) {
      add(p + "igm.group_hidden", b.igm->group_hidden);
      add(p + "igm.group_out", b.igm->group_out);
      add(p + "igm.ungroup_hidden", b.igm->ungroup_hidden);
      add(p + "igm.ungroup_out", b.igm->ungroup_out);
    }
    add(p + "mixer", b.mixer);
    add(p + "route_norm", b.route_norm);
    add(p + "router.memory", b.router.memory);
    add(p + "router.gather", b.router.gather);
    add(p + "router.scatter", b.router.scatter);
    add(p + "ffn", b.ffn);
    add(p + "out_norm", b.out_norm);
    encoder_.push_back(std::move(b));
  }

  predictor_ = Linear::init(cfg_.input_len, cfg_.horizon, rng);
  add("predictor", predictor_);

  for (std::size_t i = 1; i <= cfg_.dif_blocks; ++i) {
    DiffuserBlockParams b;
    // Counterpart encoder block N_enc − i (1-based) sets the period scale.
    b.period = cfg_.periods[cfg_.enc_blocks - i - 1];
    b.self_norm = LayerNormParams::init(d);
    b.self_mixer = MhaParams::init(d, cfg_.heads, rng);
    b.cross_norm = LayerNormParams::init(d);
    b.cross = MhaParams::init(d, cfg_.heads, rng);
    b.ffn = FeedForward::init(d, cfg_.ffn_width, rng);
    b.out_norm = LayerNormParams::init(d);

    const std::string p = "dif" + std::to_string(i - 1) + ".";
    add(p + "self_norm", b.self_norm);
    add(p + "self_mixer", b.self_mixer);
    add(p + "cross_norm", b.cross_norm);
    add(p + "cross", b.cross);
    add(p + "ffn", b.ffn);
    add(p + "out_norm", b.out_norm);
    diffuser_.push_back(std::move(b));
  }

  readout_ = Linear::init(d, 1, rng);
  add("readout", readout_);
}

void PeriodNet::add(const std::string& name, const Tensor& t) { params_.push_back({name, t}); }

void PeriodNet::add(const std::string& prefix, const Linear& l) {
  add(prefix + ".weight", l.weight);
  add(prefix + ".bias", l.bias);
}

void PeriodNet::add(const std::string& prefix, const LayerNormParams& n) {
  add(prefix + ".gamma", n.gamma);
  add(prefix + ".beta", n.beta);
}

void PeriodNet::add(const std::string& prefix, const MhaParams& p) {
  add(prefix + ".wq", p.wq);
  add(prefix + ".wk", p.wk);
  add(prefix + ".wv", p.wv);
  add(prefix + ".wo", p.wo);
}

void PeriodNet::add(const std::string& prefix, const FeedForward& f) {
  add(prefix + ".up", f.up);
  add(prefix + ".down", f.down);
}

std::vector<Tensor> PeriodNet::parameters() const {
  std::vector<Tensor> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.tensor);
  return out;
}

std::size_t PeriodNet::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.tensor.numel();
  return n;
}

Tensor PeriodNet::parameter(const std::string& name) const {
  for (const auto& p : params_) {
    if (p.name == name) return p.tensor;
  }
  throw std::out_of_range("no parameter named '" + name + "'");
}

ForwardTrace PeriodNet::forward_traced(const Tensor& x) const {
  if (x.rank() != 2 || x.dim(0) != cfg_.input_len || x.dim(1) != cfg_.variables) {
    throw DimensionError("forward: expected input " + std::to_string(cfg_.input_len) + "x" +
                         std::to_string(cfg_.variables) + ", got " + shape_str(x.shape()));
  }
  forward_count_.fetch_add(1);

  ForwardTrace trace;
  auto h = embed(x, embedding_, cfg_.positional_encoding);
  for (const auto& block : encoder_) {
    h = encoder_block(h, block, cfg_);
    trace.encoder.push_back(unstack_streams(h));
  }

  const std::size_t last = cfg_.enc_blocks - 1;
  for (std::size_t i = 1; i <= cfg_.dif_blocks; ++i) trace.diffuser_sources.push_back(last - i);

  std::vector<Tensor> columns;
  columns.reserve(cfg_.variables);
  for (std::size_t c = 0; c < cfg_.variables; ++c) {
    auto z = fc_predict(trace.encoder[last][c], predictor_);
    for (std::size_t i = 0; i < diffuser_.size(); ++i) {
      z = diffuser_block(z, trace.encoder[trace.diffuser_sources[i]][c], diffuser_[i], cfg_);
    }
    columns.push_back(readout_(z));
  }
  trace.forecast = cfg_.variables == 1 ? columns.front() : ops::concat(columns, 1);
  return trace;
}

Tensor PeriodNet::forward(const Tensor& x) const { return forward_traced(x).forecast; }

void PeriodNet::load_values(const std::vector<std::pair<std::string, Tensor>>& values) {
  if (values.size() != params_.size()) {
    throw std::invalid_argument("parameter count mismatch: model has " + std::to_string(params_.size()) +
                                ", got " + std::to_string(values.size()));
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto& [name, t] = values[i];
    auto& p = params_[i];
    if (name != p.name) throw std::invalid_argument("parameter '" + name + "' where '" + p.name + "' was expected");
    if (t.shape() != p.tensor.shape()) {
      throw DimensionError("parameter '" + name + "' has shape " + shape_str(t.shape()) + ", model expects " +
                           shape_str(p.tensor.shape()));
    }
    auto dst = p.tensor.mutable_data();
    std::copy(t.data().begin(), t.data().end(), dst.begin());
  }
}

std::vector<std::vector<double>> PeriodNet::snapshot() const {
  std::vector<std::vector<double>> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.emplace_back(p.tensor.data().begin(), p.tensor.data().end());
  return out;
}

void PeriodNet::restore(const std::vector<std::vector<double>>& values) {
  if (values.size() != params_.size()) throw std::invalid_argument("restore: parameter count mismatch");
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto dst = params_[i].tensor.mutable_data();
    if (values[i].size() != dst.size()) throw DimensionError("restore: size mismatch for " + params_[i].name);
    std::copy(values[i].begin(), values[i].end(), dst.begin());
  }
}

void PeriodNet::jitter(double stddev, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, stddev);
  for (auto& p : params_) {
    for (auto& v : p.tensor.mutable_data()) v += noise(rng);
  }
}

}  // namespace periodnet
