// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The softvq Authors.

// A complete codec model (networks, codebook, entropy model) and its
// checkpoint file.
//
// Checkpoint layout, little-endian:
//   "SVQC" | version u8 | config length u32 | config text (key=value lines)
//   then until end of file, per tensor:
//   name length u16 | name | rank u8 | extents u32 each | values as float32

#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "softvq/entropy_model.hpp"
#include "softvq/nets.hpp"
#include "softvq/quantizer.hpp"

namespace softvq {

inline constexpr char kCodebookParam[] = "quantizer.codebook";
inline constexpr char kLogitsParam[] = "entropy.logits";
inline constexpr std::uint8_t kCheckpointVersion = 1;

struct ModelConfig {
  NetConfig net;
  std::size_t k = 32;
  std::size_t m = 8;
  double sigma = 1.0;
  DistanceKind distance = DistanceKind::kEuclidean;

  void validate() const;
  // Length of one code vector, d/m.
  std::size_t code_count() const { return net.latent_size() / m; }
};

struct Model {
  ModelConfig config;
  ParamStore params;
  // Free-form provenance stored with the checkpoint (training hyperparameters).
  std::map<std::string, std::string> metadata;

  const Tensor& codebook() const { return params.at(kCodebookParam); }
  CategoricalModel entropy_model() const { return {params.at(kLogitsParam)}; }
};

// Networks from init_params, a Gaussian codebook and uniform logits.
Model init_model(const ModelConfig& cfg, std::uint64_t seed);

std::vector<std::uint8_t> serialize_checkpoint(const Model& model);
Model parse_checkpoint(std::span<const std::uint8_t> bytes);
void save_checkpoint(const Model& model, const std::string& path);
Model load_checkpoint(const std::string& path);

// Rounds every parameter to float32, the precision the checkpoint stores.
void round_to_float(ParamStore& params);

// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes);
// Hash of the serialized checkpoint; ties bitstreams to the model that made them.
std::uint64_t model_checksum(const Model& model);

}  // namespace softvq
