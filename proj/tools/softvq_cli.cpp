// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The softvq Authors.

// softvq: train, compress, decompress, eval and sweep.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "softvq/bytes.hpp"
#include "softvq/codec.hpp"
#include "softvq/error.hpp"
#include "softvq/image_io.hpp"
#include "softvq/model.hpp"
#include "softvq/sweep.hpp"
#include "softvq/trainer.hpp"

namespace {

using namespace softvq;

struct DataOptions {
  std::string path;
  std::string format = "cifar10";
  std::size_t limit = 0;
  std::size_t synthetic_count = 512;
  int synthetic_size = 32;
  int synthetic_channels = 3;
  std::uint64_t synthetic_seed = 7;
};

struct NetOptions {
  std::size_t k = 32;
  std::size_t m = 8;
  int folds = 1;
  std::vector<int> filters{64};
  int latent_channels = 8;
  int res_blocks = 10;
  int skip_every = 3;
  std::string activation = "leaky_relu";
  double sigma = 1.0;
  std::string distance = "euclidean";
};

struct TrainOptions {
  double alpha = 0.0;
  double beta = 1.0;
  std::optional<double> sigma_final;
  int epochs = 15;
  std::size_t batch = 32;
  double lr = 1e-3;
  double entropy_lr_scale = 1.0;
  std::uint64_t seed = 0;
  int refit_steps = 2000;
  int threads = 1;
};

void add_data_options(CLI::App* app, DataOptions& o, bool required) {
  auto* data = app->add_option("--data", o.path, "Dataset path (CIFAR-10 .bin file or directory, or PNM directory)");
  if (required) data->required();
  app->add_option("--format", o.format, "Dataset format")
      ->check(CLI::IsMember({"cifar10", "pnm-dir", "synthetic"}))
      ->capture_default_str();
  app->add_option("--limit", o.limit, "Use only the first N images (0 = all)")->capture_default_str();
  app->add_option("--synthetic-count", o.synthetic_count, "Images for --format synthetic")->capture_default_str();
  app->add_option("--synthetic-size", o.synthetic_size, "Side length for --format synthetic")->capture_default_str();
  app->add_option("--synthetic-channels", o.synthetic_channels, "Channels for --format synthetic")
      ->capture_default_str();
  app->add_option("--synthetic-seed", o.synthetic_seed, "Seed for --format synthetic")->capture_default_str();
}

void add_net_options(CLI::App* app, NetOptions& o) {
  app->add_option("--m", o.m, "Code vector dimension")->capture_default_str();
  app->add_option("--folds", o.folds, "Stride-2 downsampling stages")->capture_default_str();
  app->add_option("--filters", o.filters, "Feature width per stage (comma list)")
      ->delimiter(',')
      ->capture_default_str();
  app->add_option("--latent-channels", o.latent_channels, "Latent channels")->capture_default_str();
  app->add_option("--res-blocks", o.res_blocks, "Residual blocks per network")->capture_default_str();
  app->add_option("--skip-every", o.skip_every, "Residual blocks per long skip")->capture_default_str();
  app->add_option("--activation", o.activation, "Activation")
      ->check(CLI::IsMember({"leaky_relu", "relu"}))
      ->capture_default_str();
  app->add_option("--sigma", o.sigma, "Soft assignment inverse temperature")->capture_default_str();
  app->add_option("--distance", o.distance, "Soft assignment distance")
      ->check(CLI::IsMember({"euclidean", "squared"}))
      ->capture_default_str();
}

void add_train_options(CLI::App* app, TrainOptions& o) {
  app->add_option("--beta", o.beta, "Hard cross-entropy weight")->capture_default_str();
  app->add_option("--sigma-final", o.sigma_final, "Anneal sigma linearly to this value");
  app->add_option("--epochs", o.epochs, "Training epochs")->capture_default_str();
  app->add_option("--lr", o.lr, "Peak learning rate")->capture_default_str();
  app->add_option("--batch", o.batch, "Batch size")->capture_default_str();
  app->add_option("--entropy-lr-scale", o.entropy_lr_scale, "Learning-rate multiplier for the entropy model")
      ->capture_default_str();
  app->add_option("--refit-steps", o.refit_steps, "Entropy model refit steps after training")
      ->capture_default_str();
  app->add_option("--threads", o.threads, "Worker threads (<= 0: all cores, capped by SOFTVQ_THREADS)")
      ->capture_default_str();
}

Dataset load_data(const DataOptions& o) {
  Dataset data;
  if (o.format == "synthetic") {
    data = synthetic_textures(o.synthetic_count, o.synthetic_size, o.synthetic_size,
                              o.synthetic_channels, o.synthetic_seed);
  } else if (o.path.empty()) {
    throw ConfigError("--data is required for format " + o.format);
  } else if (o.format == "cifar10") {
    data = load_cifar10(o.path);
  } else {
    data = load_pnm_dir(o.path);
  }
  if (o.limit > 0 && data.images.size() > o.limit) data.images.resize(o.limit);
  if (data.empty()) throw ConfigError("dataset '" + data.source + "' is empty");
  return data;
}

TrainConfig make_train_config(const Dataset& data, const NetOptions& n, const TrainOptions& t) {
  TrainConfig cfg;
  auto& net = cfg.model.net;
  const Image& first = data.images.front();
  net.height = first.height;
  net.width = first.width;
  net.channels = first.channels;
  net.downsample_folds = n.folds;
  net.stage_channels = n.filters;
  if (net.stage_channels.size() == 1 && n.folds > 1) net.stage_channels.assign(n.folds, n.filters[0]);
  net.latent_channels = n.latent_channels;
  net.num_residual_blocks = n.res_blocks;
  net.skip_every = n.skip_every;
  net.activation = parse_activation(n.activation);
  cfg.model.k = n.k;
  cfg.model.m = n.m;
  cfg.model.sigma = n.sigma;
  cfg.model.distance = parse_distance(n.distance);
  cfg.beta = t.beta;
  cfg.sigma_final = t.sigma_final;
  cfg.epochs = t.epochs;
  cfg.batch_size = t.batch;
  cfg.base_lr = t.lr;
  cfg.entropy_lr_scale = t.entropy_lr_scale;
  cfg.entropy_refit_steps = t.refit_steps;
  cfg.threads = t.threads;
  return cfg;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path);
  if (!os) throw Error("cannot write '" + path + "'");
  return os;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"softvq: learned image compression with soft-to-hard vector quantization"};
  app.require_subcommand(1);

  DataOptions data_opts;
  NetOptions net_opts;
  TrainOptions train_opts;
  double alpha = 0.0;
  std::uint64_t seed = 0;
  std::string model_path, input, output, out_csv;
  int threads = 1;

  auto* train_cmd = app.add_subcommand("train", "Train a model and write a checkpoint");
  add_data_options(train_cmd, data_opts, false);
  add_net_options(train_cmd, net_opts);
  add_train_options(train_cmd, train_opts);
  train_cmd->add_option("--k", net_opts.k, "Codebook size")->capture_default_str();
  train_cmd->add_option("--alpha", alpha, "Soft cross-entropy weight")->capture_default_str();
  train_cmd->add_option("--seed", seed, "Random seed")->capture_default_str();
  train_cmd->add_option("--model", model_path, "Output checkpoint")->required();
  train_cmd->add_option("--out-csv", out_csv, "Per-epoch metrics CSV");

  auto* compress_cmd = app.add_subcommand("compress", "Compress a PGM/PPM image");
  compress_cmd->add_option("--model", model_path, "Checkpoint")->required();
  compress_cmd->add_option("--input", input, "Input PGM/PPM image")->required();
  compress_cmd->add_option("--output", output, "Output bitstream")->required();

  auto* decompress_cmd = app.add_subcommand("decompress", "Decompress a bitstream to PGM/PPM");
  decompress_cmd->add_option("--model", model_path, "Checkpoint")->required();
  decompress_cmd->add_option("--input", input, "Input bitstream")->required();
  decompress_cmd->add_option("--output", output, "Output PGM/PPM image")->required();

  auto* eval_cmd = app.add_subcommand("eval", "Compress and decompress a dataset, report bpp and mse");
  add_data_options(eval_cmd, data_opts, false);
  eval_cmd->add_option("--model", model_path, "Checkpoint")->required();
  eval_cmd->add_option("--out-csv", out_csv, "Per-image metrics CSV");
  eval_cmd->add_option("--threads", threads, "Worker threads")->capture_default_str();

  SweepGrid grid{{8, 32, 128}, {0.0, 0.001, 0.01}, {0}};
  DataOptions eval_opts;
  auto* sweep_cmd = app.add_subcommand("sweep", "Train and evaluate over a grid of k, alpha and seed");
  add_data_options(sweep_cmd, data_opts, false);
  add_net_options(sweep_cmd, net_opts);
  add_train_options(sweep_cmd, train_opts);
  sweep_cmd->add_option("--k", grid.ks, "Codebook sizes (comma list)")->delimiter(',')->capture_default_str();
  sweep_cmd->add_option("--alpha", grid.alphas, "Soft cross-entropy weights (comma list)")
      ->delimiter(',')
      ->capture_default_str();
  sweep_cmd->add_option("--seed", grid.seeds, "Seeds (comma list)")->delimiter(',')->capture_default_str();
  sweep_cmd->add_option("--eval-data", eval_opts.path, "Evaluation dataset (default: training data)");
  sweep_cmd->add_option("--out-csv", out_csv, "RD points CSV")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train_cmd) {
      const Dataset data = load_data(data_opts);
      TrainConfig cfg = make_train_config(data, net_opts, train_opts);
      cfg.alpha = alpha;
      cfg.seed = seed;
      const TrainResult result = train(data, cfg);
      save_checkpoint(result.model, model_path);
      if (!out_csv.empty()) {
        auto os = open_out(out_csv);
        write_metrics_csv(os, result.log);
      }
      write_metrics_csv(std::cout, result.log);
    } else if (*compress_cmd) {
      const Codec codec(load_checkpoint(model_path));
      const Image image = load_pnm(input);
      const EncodedImage enc = codec.compress(image);
      write_file(output, enc.bytes);
      std::printf("%zu bytes, %.6f bpp\n", enc.bytes.size(),
                  8.0 * static_cast<double>(enc.bytes.size()) / static_cast<double>(image.pixel_count()));
    } else if (*decompress_cmd) {
      const Codec codec(load_checkpoint(model_path));
      const DecodedImage dec = codec.decompress(read_file(input));
      save_pnm(output, dec.image);
    } else if (*eval_cmd) {
      const Codec codec(load_checkpoint(model_path));
      const EvalReport report = evaluate(codec, load_data(data_opts), threads);
      if (!out_csv.empty()) {
        auto os = open_out(out_csv);
        write_eval_csv(os, report);
      }
      std::printf("images %zu  bpp %.6f  mse %.6f  hard_xent_bpp %.6f  model_entropy_bits %.6f\n",
                  report.rows.size(), report.bpp, report.mse, report.hard_xent_bpp,
                  report.model_entropy_bits);
    } else if (*sweep_cmd) {
      const Dataset data = load_data(data_opts);
      Dataset eval_data = data;
      if (!eval_opts.path.empty()) {
        eval_opts.format = data_opts.format == "synthetic" ? "pnm-dir" : data_opts.format;
        eval_data = load_data(eval_opts);
      }
      const TrainConfig base = make_train_config(data, net_opts, train_opts);
      auto os = open_out(out_csv);
      const auto points = rd_sweep(data, eval_data, base, grid, [](std::size_t i, const RDPoint& p) {
        std::printf("[%zu] k=%zu alpha=%g seed=%llu  bpp %.5f  mse %.3f  H(q) %.4f nats\n", i, p.k,
                    p.alpha, static_cast<unsigned long long>(p.seed), p.bpp, p.mse, p.model_entropy);
        std::fflush(stdout);
      });
      write_rd_csv(os, points);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "softvq: error: %s\n", e.what());
    return 1;
  }
  return 0;
}
