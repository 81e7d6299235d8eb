#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "periodnet/text.hpp"
#include "periodnet/train.hpp"

namespace periodnet {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error("bad checkpoint: " + msg); }

constexpr char kMagic[8] = {'P', 'N', 'E', 'T', 'C', 'K', 'P', 'T'};

void put_le(std::string& out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_le(const std::string& in, std::size_t pos, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  return v;
}

std::string join_doubles(const std::vector<double>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ",";
    out += text::format_double(values[i]);
  }
  return out;
}

std::vector<double> parse_doubles(const std::string& s) {
  std::vector<double> out;
  for (const auto& part : text::split(s, ',')) out.push_back(text::parse_double(part, "checkpoint number"));
  return out;
}

std::string shape_text(const Shape& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(s[i]);
  }
  return out;
}

Shape parse_shape(const std::string& s) {
  Shape out;
  for (const auto& part : text::split(s, 'x')) out.push_back(text::parse_size(part, "tensor shape"));
  return out;
}

}  // namespace

Checkpoint make_checkpoint(const PeriodNet& model, const NormStats& stats, const std::vector<std::string>& names) {
  Checkpoint ckpt;
  ckpt.config = model.config();
  ckpt.stats = stats;
  ckpt.variable_names = names;
  for (const auto& p : model.named_parameters()) ckpt.tensors.emplace_back(p.name, p.tensor.detach());
  return ckpt;
}

std::string encode_checkpoint(const Checkpoint& ckpt) {
  std::string manifest;
  for (const auto& [k, v] : ckpt.config.entries()) manifest += "config." + k + "=" + v + "\n";
  manifest += "variables=" + text::join(ckpt.variable_names, ",") + "\n";
  manifest += "norm.mean=" + join_doubles(ckpt.stats.mean) + "\n";
  manifest += "norm.std=" + join_doubles(ckpt.stats.stddev) + "\n";
  std::size_t offset = 0;
  for (const auto& [name, t] : ckpt.tensors) {
    manifest += "tensor " + name + " " + shape_text(t.shape()) + " " + std::to_string(offset) + "\n";
    offset += t.numel() * sizeof(double);
  }

  std::string out(kMagic, sizeof(kMagic));
  put_le(out, ckpt.version, 4);
  put_le(out, manifest.size(), 8);
  out += manifest;
  for (const auto& entry : ckpt.tensors) {
    for (double v : entry.second.data()) put_le(out, std::bit_cast<std::uint64_t>(v), 8);
  }
  return out;
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  if (bytes.size() < 20 || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) fail("missing PNETCKPT magic");
  Checkpoint ckpt;
  ckpt.version = static_cast<std::uint32_t>(get_le(bytes, 8, 4));
  if (ckpt.version != kCheckpointVersion) fail("unsupported version " + std::to_string(ckpt.version));
  const std::uint64_t manifest_size = get_le(bytes, 12, 8);
  const std::size_t payload_start = 20 + manifest_size;
  if (payload_start > bytes.size()) fail("truncated manifest");

  std::istringstream manifest(bytes.substr(20, manifest_size));
  std::string line;
  struct Entry {
    std::string name;
    Shape shape;
    std::size_t offset;
  };
  std::vector<Entry> entries;
  ModelConfig cfg;
  while (std::getline(manifest, line)) {
    if (line.empty()) continue;
    if (line.rfind("tensor ", 0) == 0) {
      auto f = text::split(line, ' ');
      if (f.size() != 4) fail("malformed tensor line '" + line + "'");
      entries.push_back({f[1], parse_shape(f[2]), text::parse_size(f[3], "tensor offset")});
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos) fail("malformed manifest line '" + line + "'");
    const auto key = line.substr(0, eq), value = line.substr(eq + 1);
    if (key.rfind("config.", 0) == 0) cfg.set(key.substr(7), value);
    else if (key == "variables") ckpt.variable_names = text::split(value, ',');
    else if (key == "norm.mean") ckpt.stats.mean = parse_doubles(value);
    else if (key == "norm.std") ckpt.stats.stddev = parse_doubles(value);
    else fail("unknown manifest key '" + key + "'");
  }
  ckpt.config = cfg.resolved();

  std::size_t expected = 0;
  for (const auto& e : entries) {
    if (e.offset != expected) fail("tensor '" + e.name + "' has a non-contiguous offset");
    const std::size_t n = shape_numel(e.shape);
    if (payload_start + e.offset + n * sizeof(double) > bytes.size()) fail("payload truncated at '" + e.name + "'");
    std::vector<double> values(n);
    for (std::size_t i = 0; i < n; ++i) {
      values[i] = std::bit_cast<double>(get_le(bytes, payload_start + e.offset + i * sizeof(double), 8));
    }
    ckpt.tensors.emplace_back(e.name, Tensor::from(e.shape, std::move(values)));
    expected += n * sizeof(double);
  }
  if (payload_start + expected != bytes.size()) fail("trailing bytes after payload");
  if (ckpt.variable_names.size() != ckpt.config.variables || ckpt.stats.mean.size() != ckpt.config.variables ||
      ckpt.stats.stddev.size() != ckpt.config.variables) {
    fail("variable names or normalization stats disagree with config.variables");
  }
  // Shape check against the architecture the config describes.
  instantiate(ckpt);
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  const auto bytes = encode_checkpoint(ckpt);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return decode_checkpoint(buf.str());
}

std::unique_ptr<PeriodNet> instantiate(const Checkpoint& ckpt) {
  auto model = std::make_unique<PeriodNet>(ckpt.config, 0);
  model->load_values(ckpt.tensors);
  return model;
}

Metrics evaluate(const Checkpoint& ckpt, const std::vector<Window>& windows) {
  return evaluate(*instantiate(ckpt), windows);
}

}  // namespace periodnet
