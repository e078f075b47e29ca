// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The softvq Authors.

// Convolutional encoder/decoder pair and the named parameter store they read.

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "softvq/tensor.hpp"

namespace softvq {

enum class Activation { kLeakyRelu, kRelu };

std::string to_string(Activation a);
Activation parse_activation(std::string_view text);

struct NetConfig {
  int height = 32;
  int width = 32;
  int channels = 3;
  // Feature width after each stride-2 stage; one entry per fold (one entry when folds == 0).
  std::vector<int> stage_channels{64};
  int downsample_folds = 1;
  int latent_channels = 8;
  int num_residual_blocks = 10;
  // An extra skip connection wraps each run of `skip_every` residual blocks.
  int skip_every = 3;
  // Kernel of the stride-1 entry/exit convolutions (odd).
  int kernel = 3;
  Activation activation = Activation::kLeakyRelu;
  double leaky_slope = 0.2;

  // Throws ConfigError on an inconsistent configuration.
  void validate() const;
  int latent_height() const { return height >> downsample_folds; }
  int latent_width() const { return width >> downsample_folds; }
  // Flattened latent size d.
  std::size_t latent_size() const;
};

// A C x H x W (or any-shape) 32-bit tensor for inference; no gradient state.
struct FloatTensor {
  Shape shape;
  std::vector<float> data;
};

// How init_params fills a tensor: He-uniform with the activation gain, He-uniform
// with unit gain (no activation follows), or zeros.
enum class ParamInit { kActivated, kLinear, kZero };

struct ParamSpec {
  std::string name;
  Shape shape;
  // Inputs feeding one output unit; zero for biases.
  double fan_in = 0.0;
  ParamInit init = ParamInit::kZero;
};

// Ordered name -> tensor map holding every trainable quantity of a model.
class ParamStore {
 public:
  using Map = std::map<std::string, Tensor, std::less<>>;

  void add(std::string name, Tensor value);
  bool contains(std::string_view name) const;
  const Tensor& at(std::string_view name) const;
  Tensor& at(std::string_view name);

  std::size_t size() const { return params_.size(); }
  std::size_t total_elements() const;
  Map::const_iterator begin() const { return params_.begin(); }
  Map::const_iterator end() const { return params_.end(); }
  Map::iterator begin() { return params_.begin(); }
  Map::iterator end() { return params_.end(); }

  // Independent leaves with copied values.
  ParamStore clone(bool requires_grad) const;
  void zero_grad();

 private:
  Map params_;
};

// 32-bit copy of a ParamStore for inference.
class FloatParamStore {
 public:
  FloatParamStore() = default;
  explicit FloatParamStore(const ParamStore& params);
  const FloatTensor& at(std::string_view name) const;
  bool contains(std::string_view name) const;

 private:
  std::map<std::string, FloatTensor, std::less<>> params_;
};

class Encoder {
 public:
  explicit Encoder(NetConfig cfg);
  const NetConfig& config() const { return cfg_; }
  std::vector<ParamSpec> param_specs() const;
  // N x C x H x W -> N x latent_channels x H' x W'.
  Tensor forward(const ParamStore& params, const Tensor& x) const;
  // C x H x W -> latent_channels x H' x W', fixed evaluation order.
  FloatTensor infer(const FloatParamStore& params, const FloatTensor& x) const;

 private:
  NetConfig cfg_;
};

class Decoder {
 public:
  explicit Decoder(NetConfig cfg);
  const NetConfig& config() const { return cfg_; }
  std::vector<ParamSpec> param_specs() const;
  Tensor forward(const ParamStore& params, const Tensor& latent) const;
  FloatTensor infer(const FloatParamStore& params, const FloatTensor& latent) const;

 private:
  NetConfig cfg_;
};

Encoder build_encoder(const NetConfig& cfg);
Decoder build_decoder(const NetConfig& cfg);

// He-uniform (fan-in) weights, zero biases and zero last conv of each residual
// branch (blocks start as identities), reproducible from seed.
ParamStore init_params(const NetConfig& cfg, std::uint64_t seed);
std::size_t parameter_count(const NetConfig& cfg);

}  // namespace softvq
