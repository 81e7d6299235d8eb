#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "periodnet/tensor.hpp"

namespace periodnet {

/** CSV problem; the message carries the 1-based line number. */
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& path, std::size_t line, const std::string& what);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/** Raw multivariate series: N rows × C variables plus a label per row. */
struct SeriesFrame {
  std::string index_name = "date";
  std::vector<std::string> timestamps;
  std::vector<std::string> names;
  Tensor values;  // N×C

  std::size_t rows() const { return timestamps.size(); }
  std::size_t cols() const { return names.size(); }
  double at(std::size_t row, std::size_t col) const { return values.at(row, col); }

  /// Rows [begin, end).
  SeriesFrame slice_rows(std::size_t begin, std::size_t end) const;
};

/// First column "date", remaining numeric; timestamps must strictly increase.
SeriesFrame load_csv(const std::filesystem::path& path);

/// Same layout as load_csv but the first column is a free-form label.
SeriesFrame read_table(const std::filesystem::path& path);

void write_csv(const std::filesystem::path& path, const SeriesFrame& frame);

/// Numeric-aware ordering: numbers compare by value, other labels lexicographically.
bool timestamp_less(const std::string& a, const std::string& b);

struct SplitSpec {
  std::size_t train = 6;
  std::size_t val = 2;
  std::size_t test = 2;

  static SplitSpec parse(const std::string& text);  // "6:2:2"
  std::string str() const;
};

struct Splits {
  SeriesFrame train, val, test;
};

/// Contiguous chronological split at floor(N·cumulative/total).
Splits split_chrono(const SeriesFrame& frame, const SplitSpec& spec);

/** Per-variable z-score statistics (population standard deviation). */
struct NormStats {
  std::vector<double> mean;
  std::vector<double> stddev;
};

NormStats compute_norm_stats(const SeriesFrame& train);
SeriesFrame normalize(const SeriesFrame& frame, const NormStats& stats);
SeriesFrame denormalize(const SeriesFrame& frame, const NormStats& stats);
/// Maps a normalized T×C block back to original units.
Tensor denormalize_values(const Tensor& values, const NormStats& stats);

struct Window {
  Tensor x;  // L×C
  Tensor y;  // T×C
};

/// Offsets 0, stride, ...; count = floor((N − L − T) / stride) + 1.
std::vector<Window> make_windows(const SeriesFrame& frame, std::size_t input_len, std::size_t horizon,
                                 std::size_t stride = 1);

struct SynthComponent {
  double period = 8.0;
  double amplitude = 1.0;
  double phase = 0.0;
};

struct SynthSpec {
  std::vector<SynthComponent> components;
  double trend_slope = 0.0;
  double noise_std = 0.0;
  std::string name = "value";
};

/// "8:1:0,24:0.5:0.3" → components (period:amplitude[:phase]).
std::vector<SynthComponent> parse_components(const std::string& text);

/// Σ amplitude·sin(2π·t/period + phase) + slope·t + N(0, noise²), hourly timestamps.
SeriesFrame synth_series(std::size_t length, const SynthSpec& spec, std::uint64_t seed);
SeriesFrame synth_frame(std::size_t length, const std::vector<SynthSpec>& specs, std::uint64_t seed);

double mse(const Tensor& pred, const Tensor& truth);
double mae(const Tensor& pred, const Tensor& truth);

/// FNV-1a over the bit patterns of `values`.
std::uint64_t fingerprint(std::span<const double> values, std::uint64_t seed = 0xcbf29ce484222325ULL);

}  // namespace periodnet
