// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The softvq Authors.

#include "softvq/trainer.hpp"

#include <cmath>
#include <numeric>
#include <ostream>
#include <sstream>

#include "softvq/codec.hpp"
#include "softvq/entropy_model.hpp"
#include "softvq/error.hpp"
#include "softvq/optimizer.hpp"
#include "softvq/parallel.hpp"
#include "softvq/random.hpp"

namespace softvq {

LossTerms total_loss(const Tensor& batch, const ParamStore& params, const ModelConfig& cfg,
                     const LossWeights& weights) {
  if (batch.rank() != 4 || batch.dim(0) == 0) throw DimensionError("total_loss expects N x C x H x W");
  if (!(weights.alpha >= 0.0) || !(weights.beta >= 0.0) || !(weights.sigma >= 0.0)) {
    throw ConfigError("loss weights and sigma must be >= 0");
  }
  const Encoder encoder(cfg.net);
  const Decoder decoder(cfg.net);
  const Tensor& codebook = params.at(kCodebookParam);
  const CategoricalModel entropy_model{params.at(kLogitsParam)};
  const auto& net = cfg.net;

  LossTerms out;
  const std::size_t n = batch.dim(0);
  for (std::size_t i = 0; i < n; ++i) {
    const Tensor x = batch_item(batch, i);
    const Tensor z = channels_to_columns(encoder.forward(params, x), cfg.m);
    HardQuantization hard = quantize_hard(z, codebook);
    const Tensor assignment = soft_assignment(z, codebook, weights.sigma, cfg.distance);
    const Tensor quantized = straight_through(hard.quantized, quantize_soft(assignment, codebook));
    const Tensor x_hat = decoder.forward(
        params, columns_to_channels(quantized, net.latent_channels, net.latent_height(),
                                    net.latent_width()));
    const Tensor d = mean(square(sub(x_hat, x)));
    const Tensor s = soft_xent(assignment, entropy_model);
    const Tensor h = hard_xent(hard.codes, entropy_model);
    out.distortion = out.distortion.defined() ? add(out.distortion, d) : d;
    out.soft_xent = out.soft_xent.defined() ? add(out.soft_xent, s) : s;
    out.hard_xent = out.hard_xent.defined() ? add(out.hard_xent, h) : h;
    out.codes.push_back(std::move(hard.codes));
  }
  const double inv = 1.0 / static_cast<double>(n);
  out.distortion = scale(out.distortion, inv);
  out.soft_xent = scale(out.soft_xent, inv);
  out.hard_xent = scale(out.hard_xent, inv);
  out.total = add(add(out.distortion, scale(out.soft_xent, weights.alpha)),
                  scale(out.hard_xent, weights.beta));
  return out;
}

void TrainConfig::validate() const {
  model.validate();
  if (!(alpha >= 0.0) || !(beta >= 0.0)) throw ConfigError("alpha and beta must be >= 0");
  if (sigma_final && !(*sigma_final >= 0.0)) throw ConfigError("sigma_final must be >= 0");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (!(base_lr > 0.0)) throw ConfigError("learning rate must be > 0");
  if (!(entropy_lr_scale > 0.0)) throw ConfigError("entropy_lr_scale must be > 0");
  if (distortion != "mse") throw ConfigError("unsupported distortion '" + distortion + "'");
  if (entropy_refit_steps < 0) throw ConfigError("entropy_refit_steps must be >= 0");
  if (!(entropy_refit_lr > 0.0)) throw ConfigError("entropy_refit_lr must be > 0");
}

namespace {

void shuffle(std::vector<std::size_t>& order, Rng& rng) {
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

void seed_codebook_from_batch(Model& model, const Tensor& all,
                              std::span<const std::size_t> indices, Rng& rng) {
  const auto& cfg = model.config;
  const Encoder encoder(cfg.net);
  const ParamStore frozen = model.params.clone(false);
  std::vector<Tensor> columns;
  std::size_t total = 0;
  for (auto idx : indices) {
    columns.push_back(channels_to_columns(encoder.forward(frozen, batch_item(all, idx)), cfg.m));
    total += columns.back().dim(1);
  }
  std::vector<double> pool(cfg.m * total);
  std::size_t offset = 0;
  for (const auto& z : columns) {
    const std::size_t n = z.dim(1);
    for (std::size_t r = 0; r < cfg.m; ++r)
      for (std::size_t i = 0; i < n; ++i) pool[r * total + offset + i] = z[r * n + i];
    offset += n;
  }
  const Tensor seeded = seed_codebook(Tensor({cfg.m, total}, std::move(pool)), cfg.k, rng);
  auto dst = model.params.at(kCodebookParam).mutable_data();
  std::copy(seeded.data().begin(), seeded.data().end(), dst.begin());
}

}  // namespace

TrainResult train(const Dataset& data, const TrainConfig& cfg) {
  cfg.validate();
  if (data.empty()) throw ConfigError("training dataset is empty");
  const auto& net = cfg.model.net;
  for (const auto& img : data.images) {
    if (img.height != net.height || img.width != net.width || img.channels != net.channels) {
      throw ConfigError("dataset image shape does not match the network input");
    }
  }

  TrainResult result;
  Model& model = result.model;
  model = init_model(cfg.model, cfg.seed);
  model.metadata = {{"alpha", fmt(cfg.alpha)},          {"beta", fmt(cfg.beta)},
                    {"epochs", std::to_string(cfg.epochs)}, {"batch_size", std::to_string(cfg.batch_size)},
                    {"base_lr", fmt(cfg.base_lr)}, {"entropy_lr_scale", fmt(cfg.entropy_lr_scale)},      {"seed", std::to_string(cfg.seed)},
                    {"dataset", data.source}};
  if (cfg.sigma_final) model.metadata["sigma_final"] = fmt(*cfg.sigma_final);

  const Tensor all = images_to_tensor(data.images);
  const std::size_t n = data.size();
  const std::size_t batch = std::min(cfg.batch_size, n);
  const std::size_t steps_per_epoch = (n + batch - 1) / batch;
  const std::size_t total_steps = steps_per_epoch * static_cast<std::size_t>(cfg.epochs);
  const int workers = worker_count(cfg.threads);

  Rng rng(cfg.seed * 0x2545F4914F6CDD1Dull + 0x1234567ull);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  shuffle(order, rng);
  seed_codebook_from_batch(model, all, std::span(order).first(batch), rng);

  Adam adam;
  adam.set_lr_scale(kLogitsParam, cfg.entropy_lr_scale);
  std::size_t step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (epoch > 0) shuffle(order, rng);
    EpochMetrics metrics;
    metrics.epoch = epoch;
    for (std::size_t b = 0; b < steps_per_epoch; ++b) {
      const std::size_t begin = b * batch;
      const std::size_t count = std::min(batch, n - begin);
      const double lr = one_cycle_lr(step, total_steps, cfg.base_lr);
      double sigma = cfg.model.sigma;
      if (cfg.sigma_final && total_steps > 1) {
        sigma += (*cfg.sigma_final - sigma) * static_cast<double>(step) /
                 static_cast<double>(total_steps - 1);
      }
      const LossWeights weights{cfg.alpha, cfg.beta, sigma};

      std::vector<std::vector<double>> grads(count);
      std::vector<std::array<double, 4>> terms(count);
      parallel_for(count, workers, [&](std::size_t i) {
        ParamStore local = model.params.clone(true);
        const LossTerms t = total_loss(batch_item(all, order[begin + i]), local, cfg.model, weights);
        terms[i] = {t.total.item(), t.distortion.item(), t.soft_xent.item(), t.hard_xent.item()};
        if (!std::isfinite(terms[i][0])) return;
        backward(t.total);
        grads[i] = flatten_grads(local);
      });

      std::vector<double> flat(model.params.total_elements(), 0.0);
      for (std::size_t i = 0; i < count; ++i) {
        if (!std::isfinite(terms[i][0])) {
          throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", step " +
                             std::to_string(step) + " (distortion " + fmt(terms[i][1]) +
                             ", soft " + fmt(terms[i][2]) + ", hard " + fmt(terms[i][3]) + ")");
        }
        for (std::size_t j = 0; j < flat.size(); ++j) flat[j] += grads[i][j];
        metrics.loss += terms[i][0];
        metrics.distortion += terms[i][1];
        metrics.soft_xent += terms[i][2];
        metrics.hard_xent += terms[i][3];
      }
      const double inv = 1.0 / static_cast<double>(count);
      for (double& g : flat) {
        g *= inv;
        if (!std::isfinite(g)) {
          throw NumericError("non-finite gradient at epoch " + std::to_string(epoch) + ", step " +
                             std::to_string(step));
        }
      }
      adam.step(model.params, flat, lr);
      ++step;
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    metrics.loss *= inv_n;
    metrics.distortion *= inv_n;
    metrics.soft_xent *= inv_n;
    metrics.hard_xent *= inv_n;
    metrics.model_entropy_bits = nats_to_bits(model_entropy(model.entropy_model()));
    result.log.push_back(metrics);
  }

  if (cfg.entropy_refit_steps > 0) {
    const auto codes = dataset_codes(model, data, cfg.threads);
    CategoricalModel em = model.entropy_model();
    fit_entropy_model(em, fit_histogram(codes, cfg.model.k), cfg.entropy_refit_steps,
                      cfg.entropy_refit_lr);
  }
  return result;
}

std::vector<CodeVector> dataset_codes(const Model& model, const Dataset& data, int threads) {
  const Codec codec(model);
  std::vector<CodeVector> out(data.size());
  parallel_for(data.size(), worker_count(threads),
               [&](std::size_t i) { out[i] = codec.encode_codes(data.images[i]); });
  return out;
}

void write_metrics_csv(std::ostream& os, const std::vector<EpochMetrics>& log) {
  const auto old_precision = os.precision(10);
  os << "epoch,loss,distortion,soft_xent,hard_xent,model_entropy_bits\n";
  for (const auto& m : log) {
    os << m.epoch << ',' << m.loss << ',' << m.distortion << ',' << m.soft_xent << ','
       << m.hard_xent << ',' << m.model_entropy_bits << '\n';
  }
  os.precision(old_precision);
}

}  // namespace softvq
