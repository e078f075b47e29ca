// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The softvq Authors.

#include "softvq/model.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <sstream>

#include "softvq/bytes.hpp"
#include "softvq/error.hpp"
#include "softvq/random.hpp"

namespace softvq {

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write '" + path + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("write failed for '" + path + "'");
}

void ModelConfig::validate() const {
  net.validate();
  if (k < 2 || k > 65536) throw ConfigError("k must be in [2, 65536]");
  if (m == 0 || net.latent_channels % static_cast<int>(m) != 0) {
    throw ConfigError("latent_channels " + std::to_string(net.latent_channels) +
                      " not divisible by m=" + std::to_string(m));
  }
  if (!(sigma >= 0.0)) throw ConfigError("sigma must be >= 0");
}

Model init_model(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Model model;
  model.config = cfg;
  model.params = init_params(cfg.net, seed);
  Rng rng(seed ^ 0x9E3779B97F4A7C15ull);
  std::vector<double> e(cfg.m * cfg.k);
  for (double& v : e) v = rng.normal();
  model.params.add(kCodebookParam, Tensor({cfg.m, cfg.k}, std::move(e), true));
  model.params.add(kLogitsParam, Tensor::zeros({cfg.k}, true));
  return model;
}

namespace {

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string config_text(const Model& model) {
  const auto& c = model.config;
  const auto& n = c.net;
  std::ostringstream os;
  os << "height=" << n.height << '\n'
     << "width=" << n.width << '\n'
     << "channels=" << n.channels << '\n'
     << "stage_channels=";
  for (std::size_t i = 0; i < n.stage_channels.size(); ++i) {
    os << (i ? "," : "") << n.stage_channels[i];
  }
  os << '\n'
     << "downsample_folds=" << n.downsample_folds << '\n'
     << "latent_channels=" << n.latent_channels << '\n'
     << "num_residual_blocks=" << n.num_residual_blocks << '\n'
     << "skip_every=" << n.skip_every << '\n'
     << "kernel=" << n.kernel << '\n'
     << "activation=" << to_string(n.activation) << '\n'
     << "leaky_slope=" << fmt_double(n.leaky_slope) << '\n'
     << "k=" << c.k << '\n'
     << "m=" << c.m << '\n'
     << "sigma=" << fmt_double(c.sigma) << '\n'
     << "distance=" << to_string(c.distance) << '\n';
  for (const auto& [key, value] : model.metadata) {
    if (key.find_first_of("=\n") != std::string::npos || value.find('\n') != std::string::npos) {
      throw ContractError("metadata entries may not contain '=' in keys or newlines");
    }
    os << "meta." << key << '=' << value << '\n';
  }
  return os.str();
}

long parse_int(const std::string& key, const std::string& v) {
  long out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw FormatError("checkpoint: bad integer for '" + key + "': " + v);
  }
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double out = std::stod(v, &used);
    if (used != v.size()) throw FormatError("");
    return out;
  } catch (const std::exception&) {
    throw FormatError("checkpoint: bad number for '" + key + "': " + v);
  }
}

void apply_config(Model& model, const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("checkpoint: malformed config line '" + line + "'");
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto get = [&](const char* key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw FormatError(std::string("checkpoint: missing config key '") + key + "'");
    return it->second;
  };
  auto& n = model.config.net;
  n.height = static_cast<int>(parse_int("height", get("height")));
  n.width = static_cast<int>(parse_int("width", get("width")));
  n.channels = static_cast<int>(parse_int("channels", get("channels")));
  n.stage_channels.clear();
  std::istringstream stages(get("stage_channels"));
  for (std::string part; std::getline(stages, part, ',');) {
    n.stage_channels.push_back(static_cast<int>(parse_int("stage_channels", part)));
  }
  n.downsample_folds = static_cast<int>(parse_int("downsample_folds", get("downsample_folds")));
  n.latent_channels = static_cast<int>(parse_int("latent_channels", get("latent_channels")));
  n.num_residual_blocks =
      static_cast<int>(parse_int("num_residual_blocks", get("num_residual_blocks")));
  n.skip_every = static_cast<int>(parse_int("skip_every", get("skip_every")));
  n.kernel = static_cast<int>(parse_int("kernel", get("kernel")));
  n.activation = parse_activation(get("activation"));
  n.leaky_slope = parse_double("leaky_slope", get("leaky_slope"));
  model.config.k = static_cast<std::size_t>(parse_int("k", get("k")));
  model.config.m = static_cast<std::size_t>(parse_int("m", get("m")));
  model.config.sigma = parse_double("sigma", get("sigma"));
  model.config.distance = parse_distance(get("distance"));
  for (const auto& [key, value] : kv) {
    if (key.rfind("meta.", 0) == 0) model.metadata[key.substr(5)] = value;
  }
  try {
    model.config.validate();
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint: invalid config: ") + e.what());
  }
}

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const Model& model) {
  ByteWriter w;
  w.text("SVQC");
  w.u8(kCheckpointVersion);
  const std::string cfg = config_text(model);
  w.u32(static_cast<std::uint32_t>(cfg.size()));
  w.text(cfg);
  for (const auto& [name, tensor] : model.params) {
    w.u16(static_cast<std::uint16_t>(name.size()));
    w.text(name);
    w.u8(static_cast<std::uint8_t>(tensor.rank()));
    for (auto extent : tensor.shape()) w.u32(static_cast<std::uint32_t>(extent));
    for (double v : tensor.data()) w.f32(static_cast<float>(v));
  }
  return w.take();
}

Model parse_checkpoint(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, "checkpoint");
  if (r.text(4) != "SVQC") throw FormatError("not a checkpoint (bad magic)");
  const auto version = r.u8();
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  Model model;
  apply_config(model, r.text(r.u32()));
  while (!r.done()) {
    std::string name = r.text(r.u16());
    const auto rank = r.u8();
    Shape shape(rank);
    for (auto& e : shape) e = r.u32();
    const std::size_t n = shape_numel(shape);
    if (n * 4 > r.remaining()) throw FormatError("checkpoint: tensor '" + name + "' truncated");
    std::vector<double> values(n);
    for (auto& v : values) v = r.f32();
    model.params.add(std::move(name), Tensor(std::move(shape), std::move(values), true));
  }

  // Every expected tensor present with the expected shape.
  auto specs = build_encoder(model.config.net).param_specs();
  auto dec = build_decoder(model.config.net).param_specs();
  specs.insert(specs.end(), dec.begin(), dec.end());
  specs.push_back({kCodebookParam, {model.config.m, model.config.k}, 0.0});
  specs.push_back({kLogitsParam, {model.config.k}, 0.0});
  if (specs.size() != model.params.size()) {
    throw FormatError("checkpoint: expected " + std::to_string(specs.size()) + " tensors, found " +
                      std::to_string(model.params.size()));
  }
  for (const auto& s : specs) {
    if (!model.params.contains(s.name)) throw FormatError("checkpoint: missing tensor " + s.name);
    if (model.params.at(s.name).shape() != s.shape) {
      throw FormatError("checkpoint: tensor " + s.name + " has shape " +
                        shape_str(model.params.at(s.name).shape()) + ", expected " +
                        shape_str(s.shape));
    }
  }
  return model;
}

void save_checkpoint(const Model& model, const std::string& path) {
  write_file(path, serialize_checkpoint(model));
}

Model load_checkpoint(const std::string& path) { return parse_checkpoint(read_file(path)); }

void round_to_float(ParamStore& params) {
  for (auto& [name, tensor] : params) {
    for (double& v : tensor.mutable_data()) v = static_cast<double>(static_cast<float>(v));
  }
}

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (auto b : bytes) {
    h ^= b;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::uint64_t model_checksum(const Model& model) { return fnv1a64(serialize_checkpoint(model)); }

}  // namespace softvq
