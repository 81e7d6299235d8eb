#include "periodnet/data.hpp"

#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>

#include "periodnet/text.hpp"

namespace periodnet {

ParseError::ParseError(const std::string& path, std::size_t line, const std::string& what)
    : std::runtime_error(path + ":" + std::to_string(line) + ": " + what), line_(line) {}

SeriesFrame SeriesFrame::slice_rows(std::size_t begin, std::size_t end) const {
  if (begin >= end || end > rows()) {
    throw std::out_of_range("slice_rows: [" + std::to_string(begin) + ", " + std::to_string(end) +
                            ") outside frame of " + std::to_string(rows()) + " rows");
  }
  SeriesFrame out;
  out.index_name = index_name;
  out.names = names;
  out.timestamps.assign(timestamps.begin() + static_cast<std::ptrdiff_t>(begin),
                        timestamps.begin() + static_cast<std::ptrdiff_t>(end));
  const std::size_t c = cols();
  auto src = values.data();
  out.values = Tensor::from({end - begin, c}, std::vector<double>(src.begin() + static_cast<std::ptrdiff_t>(begin * c),
                                                                   src.begin() + static_cast<std::ptrdiff_t>(end * c)));
  return out;
}

bool timestamp_less(const std::string& a, const std::string& b) {
  try {
    return text::parse_double(a, "timestamp") < text::parse_double(b, "timestamp");
  } catch (const std::invalid_argument&) {
    return a < b;
  }
}

namespace {

SeriesFrame parse_table(const std::filesystem::path& path, bool dated) {
  const std::string where = path.string();
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + where + "'");

  SeriesFrame frame;
  std::vector<double> values;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (text::trim(line).empty()) continue;
    auto cells = text::split(line, ',');
    if (!have_header) {
      if (cells.size() < 2) throw ParseError(where, line_no, "header needs a label column and at least one variable");
      frame.index_name = text::trim(cells[0]);
      if (dated && frame.index_name != "date") {
        throw ParseError(where, line_no, "first column must be named 'date', found '" + frame.index_name + "'");
      }
      for (std::size_t i = 1; i < cells.size(); ++i) frame.names.push_back(text::trim(cells[i]));
      have_header = true;
      continue;
    }
    if (cells.size() != frame.names.size() + 1) {
      throw ParseError(where, line_no, "expected " + std::to_string(frame.names.size() + 1) + " cells, found " +
                                           std::to_string(cells.size()));
    }
    auto stamp = text::trim(cells[0]);
    if (dated && !frame.timestamps.empty() && !timestamp_less(frame.timestamps.back(), stamp)) {
      throw ParseError(where, line_no, "timestamp '" + stamp + "' does not follow '" + frame.timestamps.back() + "'");
    }
    for (std::size_t i = 1; i < cells.size(); ++i) {
      try {
        values.push_back(text::parse_double(cells[i], frame.names[i - 1]));
      } catch (const std::invalid_argument& e) {
        throw ParseError(where, line_no, e.what());
      }
    }
    frame.timestamps.push_back(std::move(stamp));
  }
  if (!have_header) throw ParseError(where, line_no, "missing header row");
  if (frame.timestamps.empty()) throw ParseError(where, line_no, "no data rows");
  frame.values = Tensor::from({frame.timestamps.size(), frame.names.size()}, std::move(values));
  return frame;
}

}  // namespace

SeriesFrame load_csv(const std::filesystem::path& path) { return parse_table(path, true); }

SeriesFrame read_table(const std::filesystem::path& path) { return parse_table(path, false); }

void write_csv(const std::filesystem::path& path, const SeriesFrame& frame) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << frame.index_name;
  for (const auto& n : frame.names) out << ',' << n;
  out << '\n';
  for (std::size_t r = 0; r < frame.rows(); ++r) {
    out << frame.timestamps[r];
    for (std::size_t c = 0; c < frame.cols(); ++c) out << ',' << text::format_double(frame.at(r, c));
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

SplitSpec SplitSpec::parse(const std::string& text) {
  auto parts = text::split(text, ':');
  if (parts.size() != 3) throw std::invalid_argument("split ratio must look like 6:2:2, got '" + text + "'");
  SplitSpec s{text::parse_size(parts[0], "split"), text::parse_size(parts[1], "split"),
              text::parse_size(parts[2], "split")};
  if (s.train + s.val + s.test == 0) throw std::invalid_argument("split ratios must not all be zero");
  return s;
}

std::string SplitSpec::str() const {
  return std::to_string(train) + ":" + std::to_string(val) + ":" + std::to_string(test);
}

Splits split_chrono(const SeriesFrame& frame, const SplitSpec& spec) {
  const std::size_t n = frame.rows();
  const std::size_t total = spec.train + spec.val + spec.test;
  if (total == 0) throw std::invalid_argument("split ratios must not all be zero");
  if (n < 10) throw std::invalid_argument("split_chrono needs at least 10 rows, got " + std::to_string(n));
  const std::size_t a = n * spec.train / total;
  const std::size_t b = n * (spec.train + spec.val) / total;
  if (a == 0 || b == a || b == n) {
    throw std::invalid_argument("split " + spec.str() + " of " + std::to_string(n) + " rows leaves an empty segment");
  }
  return {frame.slice_rows(0, a), frame.slice_rows(a, b), frame.slice_rows(b, n)};
}

NormStats compute_norm_stats(const SeriesFrame& train) {
  const std::size_t n = train.rows(), c = train.cols();
  NormStats stats;
  stats.mean.assign(c, 0.0);
  stats.stddev.assign(c, 0.0);
  for (std::size_t j = 0; j < c; ++j) {
    double mu = 0.0;
    for (std::size_t i = 0; i < n; ++i) mu += train.at(i, j);
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) var += (train.at(i, j) - mu) * (train.at(i, j) - mu);
    var /= static_cast<double>(n);
    if (!(var > 0.0)) {
      throw std::invalid_argument("variable '" + train.names[j] + "' is constant on the training split (std = 0)");
    }
    stats.mean[j] = mu;
    stats.stddev[j] = std::sqrt(var);
  }
  return stats;
}

namespace {

Tensor map_columns(const Tensor& values, const NormStats& stats, bool forward) {
  const std::size_t n = values.dim(0), c = values.dim(1);
  if (stats.mean.size() != c || stats.stddev.size() != c) {
    throw DimensionError("normalization stats cover " + std::to_string(stats.mean.size()) + " variables, data has " +
                         std::to_string(c));
  }
  std::vector<double> out(n * c);
  auto src = values.data();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      if (stats.stddev[j] <= 0.0) throw std::invalid_argument("zero standard deviation for variable " + std::to_string(j));
      const double v = src[i * c + j];
      out[i * c + j] = forward ? (v - stats.mean[j]) / stats.stddev[j] : v * stats.stddev[j] + stats.mean[j];
    }
  }
  return Tensor::from({n, c}, std::move(out));
}

}  // namespace

SeriesFrame normalize(const SeriesFrame& frame, const NormStats& stats) {
  SeriesFrame out = frame;
  out.values = map_columns(frame.values, stats, true);
  return out;
}

SeriesFrame denormalize(const SeriesFrame& frame, const NormStats& stats) {
  SeriesFrame out = frame;
  out.values = map_columns(frame.values, stats, false);
  return out;
}

Tensor denormalize_values(const Tensor& values, const NormStats& stats) { return map_columns(values, stats, false); }

std::vector<Window> make_windows(const SeriesFrame& frame, std::size_t input_len, std::size_t horizon,
                                 std::size_t stride) {
  if (stride == 0) throw std::invalid_argument("window stride must be >= 1");
  if (input_len == 0 || horizon == 0) throw std::invalid_argument("window lengths must be >= 1");
  const std::size_t n = frame.rows(), c = frame.cols();
  if (n < input_len + horizon) {
    throw std::invalid_argument("series of " + std::to_string(n) + " rows is shorter than input_len + horizon = " +
                                std::to_string(input_len + horizon));
  }
  const std::size_t count = (n - input_len - horizon) / stride + 1;
  auto src = frame.values.data();
  std::vector<Window> out;
  out.reserve(count);
  for (std::size_t w = 0; w < count; ++w) {
    const std::size_t off = w * stride;
    auto at = [&](std::size_t row) { return src.begin() + static_cast<std::ptrdiff_t>(row * c); };
    out.push_back({Tensor::from({input_len, c}, std::vector<double>(at(off), at(off + input_len))),
                   Tensor::from({horizon, c}, std::vector<double>(at(off + input_len), at(off + input_len + horizon)))});
  }
  return out;
}

std::vector<SynthComponent> parse_components(const std::string& spec) {
  std::vector<SynthComponent> out;
  if (text::trim(spec).empty()) return out;
  for (const auto& item : text::split(spec, ',')) {
    auto f = text::split(item, ':');
    if (f.size() < 2 || f.size() > 3) {
      throw std::invalid_argument("component '" + item + "' must be period:amplitude[:phase]");
    }
    SynthComponent c{text::parse_double(f[0], "period"), text::parse_double(f[1], "amplitude"),
                     f.size() == 3 ? text::parse_double(f[2], "phase") : 0.0};
    out.push_back(c);
  }
  return out;
}

namespace {

std::string hourly_stamp(std::size_t hour) {
  using namespace std::chrono;
  const sys_days start = year{2016} / July / 1;
  const auto tp = sys_seconds(start) + hours(hour);
  const auto day = floor<days>(tp);
  const year_month_day ymd(day);
  const hh_mm_ss hms(tp - day);
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u %02ld:00:00", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<long>(hms.hours().count()));
  return buf;
}

std::vector<double> synth_values(std::size_t length, const SynthSpec& spec, std::mt19937_64& rng) {
  for (const auto& c : spec.components) {
    if (!(c.period >= 2.0)) throw std::invalid_argument("synthetic component periods must be >= 2");
  }
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<double> out(length);
  for (std::size_t t = 0; t < length; ++t) {
    const double tt = static_cast<double>(t);
    double v = spec.trend_slope * tt;
    for (const auto& c : spec.components) {
      // fmod keeps x[t] and x[t + period] bit-identical.
      v += c.amplitude * std::sin(2.0 * std::numbers::pi * std::fmod(tt, c.period) / c.period + c.phase);
    }
    if (spec.noise_std > 0.0) v += spec.noise_std * noise(rng);
    out[t] = v;
  }
  return out;
}

}  // namespace

SeriesFrame synth_frame(std::size_t length, const std::vector<SynthSpec>& specs, std::uint64_t seed) {
  if (specs.empty()) throw std::invalid_argument("synth_frame needs at least one variable");
  if (length == 0) throw std::invalid_argument("synthetic length must be >= 1");
  std::mt19937_64 rng(seed);
  std::vector<std::vector<double>> cols;
  SeriesFrame frame;
  for (const auto& s : specs) {
    cols.push_back(synth_values(length, s, rng));
    frame.names.push_back(s.name);
  }
  std::vector<double> values(length * specs.size());
  for (std::size_t t = 0; t < length; ++t) {
    frame.timestamps.push_back(hourly_stamp(t));
    for (std::size_t j = 0; j < specs.size(); ++j) values[t * specs.size() + j] = cols[j][t];
  }
  frame.values = Tensor::from({length, specs.size()}, std::move(values));
  return frame;
}

SeriesFrame synth_series(std::size_t length, const SynthSpec& spec, std::uint64_t seed) {
  return synth_frame(length, {spec}, seed);
}

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(what) + ": shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

}  // namespace

double mse(const Tensor& pred, const Tensor& truth) {
  require_same_shape(pred, truth, "mse");
  auto p = pred.data(), t = truth.data();
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) acc += (p[i] - t[i]) * (p[i] - t[i]);
  return acc / static_cast<double>(p.size());
}

double mae(const Tensor& pred, const Tensor& truth) {
  require_same_shape(pred, truth, "mae");
  auto p = pred.data(), t = truth.data();
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) acc += std::abs(p[i] - t[i]);
  return acc / static_cast<double>(p.size());
}

std::uint64_t fingerprint(std::span<const double> values, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (double v : values) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) {
      h ^= (bits >> (8 * i)) & 0xffU;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

}  // namespace periodnet
