// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The softvq Authors.

#include "softvq/nets.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "softvq/error.hpp"
#include "softvq/kernels.hpp"
#include "softvq/random.hpp"

namespace softvq {

std::string to_string(Activation a) {
  return a == Activation::kRelu ? "relu" : "leaky_relu";
}

Activation parse_activation(std::string_view text) {
  if (text == "relu") return Activation::kRelu;
  if (text == "leaky_relu") return Activation::kLeakyRelu;
  throw ConfigError("unknown activation '" + std::string(text) + "'");
}

void NetConfig::validate() const {
  if (height <= 0 || width <= 0 || channels <= 0) throw ConfigError("image dims must be positive");
  if (downsample_folds < 0 || downsample_folds > 15) throw ConfigError("downsample_folds out of range");
  const int unit = 1 << downsample_folds;
  if (height % unit != 0 || width % unit != 0) {
    throw ConfigError("image " + std::to_string(height) + "x" + std::to_string(width) +
                      " not divisible by 2^" + std::to_string(downsample_folds));
  }
  const std::size_t stages = static_cast<std::size_t>(std::max(downsample_folds, 1));
  if (stage_channels.size() != stages) {
    throw ConfigError("stage_channels needs " + std::to_string(stages) + " entries, got " +
                      std::to_string(stage_channels.size()));
  }
  for (int c : stage_channels) {
    if (c <= 0) throw ConfigError("stage channel widths must be positive");
  }
  if (latent_channels <= 0) throw ConfigError("latent_channels must be positive");
  if (num_residual_blocks < 0) throw ConfigError("num_residual_blocks must be >= 0");
  if (skip_every < 1) throw ConfigError("skip_every must be >= 1");
  if (kernel < 1 || kernel % 2 == 0) throw ConfigError("kernel must be odd and positive");
  if (!(leaky_slope >= 0.0 && leaky_slope < 1.0)) throw ConfigError("leaky_slope must be in [0, 1)");
}

std::size_t NetConfig::latent_size() const {
  return static_cast<std::size_t>(latent_channels) * latent_height() * latent_width();
}

void ParamStore::add(std::string name, Tensor value) {
  if (params_.contains(name)) throw ContractError("duplicate parameter '" + name + "'");
  params_.emplace(std::move(name), std::move(value));
}

bool ParamStore::contains(std::string_view name) const { return params_.find(name) != params_.end(); }

const Tensor& ParamStore::at(std::string_view name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw ContractError("missing parameter '" + std::string(name) + "'");
  return it->second;
}

Tensor& ParamStore::at(std::string_view name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw ContractError("missing parameter '" + std::string(name) + "'");
  return it->second;
}

std::size_t ParamStore::total_elements() const {
  std::size_t n = 0;
  for (const auto& [name, t] : params_) n += t.numel();
  return n;
}

ParamStore ParamStore::clone(bool requires_grad) const {
  ParamStore out;
  for (const auto& [name, t] : params_) out.add(name, t.clone(requires_grad));
  return out;
}

void ParamStore::zero_grad() {
  for (auto& [name, t] : params_) t.zero_grad();
}

FloatParamStore::FloatParamStore(const ParamStore& params) {
  for (const auto& [name, t] : params) {
    FloatTensor f{t.shape(), std::vector<float>(t.numel())};
    std::transform(t.data().begin(), t.data().end(), f.data.begin(),
                   [](double v) { return static_cast<float>(v); });
    params_.emplace(name, std::move(f));
  }
}

const FloatTensor& FloatParamStore::at(std::string_view name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw ContractError("missing parameter '" + std::string(name) + "'");
  return it->second;
}

bool FloatParamStore::contains(std::string_view name) const {
  return params_.find(name) != params_.end();
}

namespace {

constexpr int kSampleKernel = 4;  // stride-2 down/up sampling
constexpr int kResidualKernel = 3;

// Architecture shared by both execution backends. A backend provides conv,
// conv_transpose, act and add over its own value type; parameter names here
// must match param_specs().
struct LayerPlan {
  template <class Backend>
  static typename Backend::Value residual_stack(const NetConfig& cfg, const std::string& prefix,
                                                Backend& be, typename Backend::Value h) {
    const int n = cfg.num_residual_blocks;
    for (int start = 0; start < n; start += cfg.skip_every) {
      auto group_in = h;
      const int stop = std::min(n, start + cfg.skip_every);
      for (int b = start; b < stop; ++b) {
        const std::string base = prefix + ".res" + std::to_string(b);
        auto r = be.conv(base + ".conv1", h, 1, kResidualKernel / 2);
        r = be.act(r);
        r = be.conv(base + ".conv2", r, 1, kResidualKernel / 2);
        h = be.add(h, r);
      }
      h = be.add(h, group_in);
    }
    return h;
  }

  template <class Backend>
  static typename Backend::Value encoder(const NetConfig& cfg, Backend& be,
                                         typename Backend::Value h) {
    if (cfg.downsample_folds == 0) {
      h = be.act(be.conv("enc.stem", h, 1, cfg.kernel / 2));
    }
    for (int i = 0; i < cfg.downsample_folds; ++i) {
      h = be.act(be.conv("enc.down" + std::to_string(i), h, 2, 1));
    }
    h = residual_stack(cfg, "enc", be, h);
    return be.conv("enc.out", h, 1, cfg.kernel / 2);
  }

  template <class Backend>
  static typename Backend::Value decoder(const NetConfig& cfg, Backend& be,
                                         typename Backend::Value h) {
    h = be.act(be.conv("dec.in", h, 1, cfg.kernel / 2));
    h = residual_stack(cfg, "dec", be, h);
    for (int i = cfg.downsample_folds - 1; i >= 0; --i) {
      h = be.conv_transpose("dec.up" + std::to_string(i), h, 2, 1);
      if (i > 0) h = be.act(h);
    }
    if (cfg.downsample_folds == 0) h = be.conv("dec.out", h, 1, cfg.kernel / 2);
    return h;
  }
};

void add_conv(std::vector<ParamSpec>& out, const std::string& name, int in, int outc, int k,
              ParamInit init) {
  out.push_back({name + ".w", {static_cast<std::size_t>(outc), static_cast<std::size_t>(in),
                               static_cast<std::size_t>(k), static_cast<std::size_t>(k)},
                 static_cast<double>(in) * k * k, init});
  out.push_back({name + ".b", {static_cast<std::size_t>(outc)}, 0.0});
}

// Transposed conv weight is in x out x k x k; each output sees in*k*k/stride^2 inputs.
void add_conv_transpose(std::vector<ParamSpec>& out, const std::string& name, int in, int outc,
                        int k, int stride, ParamInit init) {
  out.push_back({name + ".w", {static_cast<std::size_t>(in), static_cast<std::size_t>(outc),
                               static_cast<std::size_t>(k), static_cast<std::size_t>(k)},
                 static_cast<double>(in) * k * k / (stride * stride), init});
  out.push_back({name + ".b", {static_cast<std::size_t>(outc)}, 0.0});
}

void add_residuals(std::vector<ParamSpec>& out, const NetConfig& cfg, const std::string& prefix) {
  const int w = cfg.stage_channels.back();
  for (int b = 0; b < cfg.num_residual_blocks; ++b) {
    const std::string base = prefix + ".res" + std::to_string(b);
    add_conv(out, base + ".conv1", w, w, kResidualKernel, ParamInit::kActivated);
    add_conv(out, base + ".conv2", w, w, kResidualKernel, ParamInit::kZero);
  }
}

class AutodiffBackend {
 public:
  using Value = Tensor;

  AutodiffBackend(const ParamStore& params, const NetConfig& cfg) : params_(params), cfg_(cfg) {}

  Tensor conv(const std::string& name, const Tensor& x, int stride, int pad) {
    return conv2d(x, params_.at(name + ".w"), params_.at(name + ".b"), stride, pad);
  }
  Tensor conv_transpose(const std::string& name, const Tensor& x, int stride, int pad) {
    return conv2d_transpose(x, params_.at(name + ".w"), params_.at(name + ".b"), stride, pad);
  }
  Tensor act(const Tensor& x) {
    return cfg_.activation == Activation::kRelu ? relu(x) : leaky_relu(x, cfg_.leaky_slope);
  }
  Tensor add(const Tensor& a, const Tensor& b) { return softvq::add(a, b); }

 private:
  const ParamStore& params_;
  const NetConfig& cfg_;
};

class FloatBackend {
 public:
  using Value = FloatTensor;

  FloatBackend(const FloatParamStore& params, const NetConfig& cfg) : params_(params), cfg_(cfg) {}

  FloatTensor conv(const std::string& name, const FloatTensor& x, int stride, int pad) {
    const auto& w = params_.at(name + ".w");
    const auto& b = params_.at(name + ".b");
    kernels::ConvGeometry g;
    g.channels = static_cast<int>(x.shape[0]);
    g.height = static_cast<int>(x.shape[1]);
    g.width = static_cast<int>(x.shape[2]);
    g.filters = static_cast<int>(w.shape[0]);
    g.kernel_h = static_cast<int>(w.shape[2]);
    g.kernel_w = static_cast<int>(w.shape[3]);
    g.stride = stride;
    g.pad = pad;
    if (static_cast<int>(w.shape[1]) != g.channels) {
      throw DimensionError("conv " + name + ": channel mismatch");
    }
    FloatTensor out{{static_cast<std::size_t>(g.filters), static_cast<std::size_t>(g.out_h()),
                     static_cast<std::size_t>(g.out_w())},
                    std::vector<float>(g.out_size())};
    scratch_.resize(g.patch_size() * g.out_pixels());
    kernels::conv2d_forward<float>(g, x.data.data(), w.data.data(), b.data.data(),
                                   out.data.data(), scratch_);
    return out;
  }

  FloatTensor conv_transpose(const std::string& name, const FloatTensor& x, int stride, int pad) {
    const auto& w = params_.at(name + ".w");
    const auto& b = params_.at(name + ".b");
    if (w.shape[0] != x.shape[0]) throw DimensionError("conv_transpose " + name + ": channel mismatch");
    kernels::ConvGeometry g;
    g.channels = static_cast<int>(w.shape[1]);
    g.kernel_h = static_cast<int>(w.shape[2]);
    g.kernel_w = static_cast<int>(w.shape[3]);
    g.height = (static_cast<int>(x.shape[1]) - 1) * stride - 2 * pad + g.kernel_h;
    g.width = (static_cast<int>(x.shape[2]) - 1) * stride - 2 * pad + g.kernel_w;
    g.filters = static_cast<int>(w.shape[0]);
    g.stride = stride;
    g.pad = pad;
    FloatTensor out{{static_cast<std::size_t>(g.channels), static_cast<std::size_t>(g.height),
                     static_cast<std::size_t>(g.width)},
                    std::vector<float>(g.in_size())};
    scratch_.resize(g.patch_size() * g.out_pixels());
    kernels::conv_transpose_forward<float>(g, x.data.data(), w.data.data(), b.data.data(),
                                           out.data.data(), scratch_);
    return out;
  }

  FloatTensor act(FloatTensor x) {
    const float slope =
        cfg_.activation == Activation::kRelu ? 0.0f : static_cast<float>(cfg_.leaky_slope);
    for (float& v : x.data) v = v > 0.0f ? v : slope * v;
    return x;
  }

  FloatTensor add(FloatTensor a, const FloatTensor& b) {
    for (std::size_t i = 0; i < a.data.size(); ++i) a.data[i] += b.data[i];
    return a;
  }

 private:
  const FloatParamStore& params_;
  const NetConfig& cfg_;
  std::vector<float> scratch_;
};

void check_input(const Shape& shape, std::size_t channels, std::size_t height, std::size_t width,
                 const char* what) {
  const std::size_t r = shape.size();
  if (r < 3 || shape[r - 3] != channels || shape[r - 2] != height || shape[r - 1] != width) {
    throw DimensionError(std::string(what) + ": expected ...x" + std::to_string(channels) + "x" +
                         std::to_string(height) + "x" + std::to_string(width) + ", got " +
                         shape_str(shape));
  }
}

}  // namespace

Encoder::Encoder(NetConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

std::vector<ParamSpec> Encoder::param_specs() const {
  std::vector<ParamSpec> out;
  const auto& s = cfg_.stage_channels;
  if (cfg_.downsample_folds == 0) add_conv(out, "enc.stem", cfg_.channels, s[0], cfg_.kernel, ParamInit::kActivated);
  for (int i = 0; i < cfg_.downsample_folds; ++i) {
    add_conv(out, "enc.down" + std::to_string(i), i == 0 ? cfg_.channels : s[i - 1], s[i],
             kSampleKernel, ParamInit::kActivated);
  }
  add_residuals(out, cfg_, "enc");
  add_conv(out, "enc.out", s.back(), cfg_.latent_channels, cfg_.kernel, ParamInit::kLinear);
  return out;
}

Tensor Encoder::forward(const ParamStore& params, const Tensor& x) const {
  if (x.rank() != 4) throw DimensionError("encoder expects N x C x H x W input");
  check_input(x.shape(), cfg_.channels, cfg_.height, cfg_.width, "encoder");
  AutodiffBackend be(params, cfg_);
  return LayerPlan::encoder(cfg_, be, x);
}

FloatTensor Encoder::infer(const FloatParamStore& params, const FloatTensor& x) const {
  if (x.shape.size() != 3) throw DimensionError("encoder inference expects C x H x W input");
  check_input(x.shape, cfg_.channels, cfg_.height, cfg_.width, "encoder");
  FloatBackend be(params, cfg_);
  return LayerPlan::encoder(cfg_, be, x);
}

Decoder::Decoder(NetConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

std::vector<ParamSpec> Decoder::param_specs() const {
  std::vector<ParamSpec> out;
  const auto& s = cfg_.stage_channels;
  add_conv(out, "dec.in", cfg_.latent_channels, s.back(), cfg_.kernel, ParamInit::kActivated);
  add_residuals(out, cfg_, "dec");
  for (int i = cfg_.downsample_folds - 1; i >= 0; --i) {
    add_conv_transpose(out, "dec.up" + std::to_string(i), s[i], i == 0 ? cfg_.channels : s[i - 1],
                       kSampleKernel, 2, i == 0 ? ParamInit::kLinear : ParamInit::kActivated);
  }
  if (cfg_.downsample_folds == 0) {
    add_conv(out, "dec.out", s[0], cfg_.channels, cfg_.kernel, ParamInit::kLinear);
  }
  return out;
}

Tensor Decoder::forward(const ParamStore& params, const Tensor& latent) const {
  if (latent.rank() != 4) throw DimensionError("decoder expects N x C x H x W latent");
  check_input(latent.shape(), cfg_.latent_channels, cfg_.latent_height(), cfg_.latent_width(),
              "decoder");
  AutodiffBackend be(params, cfg_);
  return LayerPlan::decoder(cfg_, be, latent);
}

FloatTensor Decoder::infer(const FloatParamStore& params, const FloatTensor& latent) const {
  if (latent.shape.size() != 3) throw DimensionError("decoder inference expects C x H x W latent");
  check_input(latent.shape, cfg_.latent_channels, cfg_.latent_height(), cfg_.latent_width(),
              "decoder");
  FloatBackend be(params, cfg_);
  return LayerPlan::decoder(cfg_, be, latent);
}

Encoder build_encoder(const NetConfig& cfg) { return Encoder(cfg); }
Decoder build_decoder(const NetConfig& cfg) { return Decoder(cfg); }

ParamStore init_params(const NetConfig& cfg, std::uint64_t seed) {
  auto specs = build_encoder(cfg).param_specs();
  auto dec = build_decoder(cfg).param_specs();
  specs.insert(specs.end(), dec.begin(), dec.end());

  const double gain = cfg.activation == Activation::kRelu
                          ? std::sqrt(2.0)
                          : std::sqrt(2.0 / (1.0 + cfg.leaky_slope * cfg.leaky_slope));
  Rng rng(seed);
  ParamStore params;
  for (const auto& spec : specs) {
    std::vector<double> values(shape_numel(spec.shape), 0.0);
    if (spec.init != ParamInit::kZero) {
      const double g = spec.init == ParamInit::kActivated ? gain : 1.0;
      const double bound = g * std::sqrt(3.0 / spec.fan_in);
      for (double& v : values) v = rng.uniform(-bound, bound);
    }
    params.add(spec.name, Tensor(spec.shape, std::move(values), true));
  }
  return params;
}

std::size_t parameter_count(const NetConfig& cfg) {
  std::size_t n = 0;
  for (const auto& s : build_encoder(cfg).param_specs()) n += shape_numel(s.shape);
  for (const auto& s : build_decoder(cfg).param_specs()) n += shape_numel(s.shape);
  return n;
}

}  // namespace softvq
