// Copyright 2026 The qvit Authors
// SPDX-License-Identifier: Apache-2.0

#include "qvit/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "qvit/errors.hpp"
#include "qvit/optim.hpp"
#include "qvit/parallel.hpp"

namespace qvit::train {

namespace {

std::size_t resolve_threads(std::size_t requested) { return requested > 0 ? requested : thread_budget(); }

std::vector<Tensor> crop_all(const model::ModelConfig& config, std::span<const data::EventRecord> records) {
  const auto& g = config.geometry;
  std::vector<Tensor> images;
  images.reserve(records.size());
  for (const auto& r : records) {
    images.push_back(model::crop_center(r.energy, data::kGridSide, data::kGridSide, g.crop_rows, g.crop_cols));
  }
  return images;
}

std::vector<double> predict_images(const model::ModelConfig& config, const model::ParameterSet& params,
                                   const std::vector<Tensor>& images, std::size_t threads) {
  std::vector<double> probs(images.size());
  parallel_for(images.size(), threads, [&](std::size_t begin, std::size_t end, std::size_t) {
    const auto tensors = model::ModelTensors::bind(config, params, false);
    for (std::size_t i = begin; i < end; ++i) probs[i] = model::forward(tensors, config, images[i]).item();
  });
  return probs;
}

struct SampleOutcome {
  double loss = 0.0;
  double prob = 0.0;
};

SampleOutcome sample_gradient(const model::ModelConfig& config, const model::ParameterSet& params,
                              const Tensor& image, int label, const model::ForwardOptions& options,
                              std::span<double> grad) {
  const auto tensors = model::ModelTensors::bind(config, params, true);
  const auto p = model::forward(tensors, config, image, options);
  const auto loss = bce_loss(p, Tensor::vector({static_cast<double>(label)}));
  backward(loss);
  tensors.accumulate_grads(grad);
  return {loss.item(), p.item()};
}

model::Checkpoint make_checkpoint(const model::ModelConfig& config, const TrainConfig& tc,
                                  const model::ParameterSet& params, int epoch) {
  model::Checkpoint ck;
  ck.config = config;
  ck.seed = tc.seed;
  ck.epoch = epoch;
  ck.params = params;
  return ck;
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 0) throw ConfigError("epochs must be non-negative");
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning rate must be positive");
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"seed", c.seed},
          {"deterministic", c.deterministic},
          {"gradient", c.gradient == attention::GradientMethod::Adjoint ? "adjoint" : "parameter-shift"},
          {"selection", "validation accuracy"}};
}

TrainResult train(const model::ModelConfig& config, std::span<const data::EventRecord> train_set,
                  std::span<const data::EventRecord> val_set, const TrainConfig& tc) {
  config.validate();
  tc.validate();
  if (train_set.empty()) throw ValidationError("training split is empty");
  if (val_set.empty()) throw ValidationError("validation split is empty");

  const auto threads = resolve_threads(tc.threads);
  const auto train_images = crop_all(config, train_set);
  const auto val_images = crop_all(config, val_set);
  std::vector<int> val_labels;
  for (const auto& r : val_set) val_labels.push_back(r.label);

  auto params = model::ParameterSet::initialize(config, tc.seed);
  TrainResult result;
  result.best = make_checkpoint(config, tc, params, 0);
  if (tc.epochs == 0) return result;

  const std::size_t n = train_set.size(), p = params.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::seed_seq seq{static_cast<std::uint32_t>(tc.seed), static_cast<std::uint32_t>(tc.seed >> 32), 0x5eedU};
  std::mt19937_64 rng(seq);

  const model::ForwardOptions fwd{tc.gradient};
  AdamOptions adam;
  adam.learning_rate = tc.learning_rate;
  AdamState state;

  std::vector<double> grad(p);
  std::vector<double> sample_grads;
  std::vector<std::vector<double>> worker_grads;
  std::vector<SampleOutcome> outcomes(n);
  double best_accuracy = -1.0;

  auto diverge = [&](int epoch, const std::string& what) {
    if (!tc.diagnostic_path.empty()) {
      auto diag = make_checkpoint(config, tc, params, epoch);
      diag.extra = {{"diverged", true}, {"step", result.steps}};
      model::save_checkpoint(tc.diagnostic_path, diag);
    }
    throw NumericError("training diverged at epoch " + std::to_string(epoch) + ", step " +
                       std::to_string(result.steps) + ": " + what);
  };

  for (int epoch = 1; epoch <= tc.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t hits = 0;

    for (std::size_t start = 0; start < n; start += tc.batch_size) {
      const std::size_t bsize = std::min(tc.batch_size, n - start);
      const auto batch = std::span<const std::size_t>(order).subspan(start, bsize);
      std::fill(grad.begin(), grad.end(), 0.0);

      bool forward_failed = false;
      try {
        if (tc.deterministic) {
          sample_grads.assign(bsize * p, 0.0);
          parallel_for(bsize, threads, [&](std::size_t b, std::size_t e, std::size_t) {
            for (std::size_t k = b; k < e; ++k) {
              const auto i = batch[k];
              outcomes[i] = sample_gradient(config, params, train_images[i], train_set[i].label, fwd,
                                            std::span<double>(sample_grads).subspan(k * p, p));
            }
          });
          for (std::size_t k = 0; k < bsize; ++k)
            for (std::size_t j = 0; j < p; ++j) grad[j] += sample_grads[k * p + j];
        } else {
          const auto workers = std::min(threads, bsize);
          worker_grads.assign(workers, std::vector<double>(p, 0.0));
          parallel_for(bsize, workers, [&](std::size_t b, std::size_t e, std::size_t w) {
            for (std::size_t k = b; k < e; ++k) {
              const auto i = batch[k];
              outcomes[i] = sample_gradient(config, params, train_images[i], train_set[i].label, fwd, worker_grads[w]);
            }
          });
          for (const auto& wg : worker_grads)
            for (std::size_t j = 0; j < p; ++j) grad[j] += wg[j];
        }

      } catch (const NumericError&) {
        forward_failed = true;
      }

      double batch_loss = 0.0;
      for (auto i : batch) {
        batch_loss += outcomes[i].loss;
        hits += (outcomes[i].prob >= 0.5) == (train_set[i].label == 1) ? 1 : 0;
      }
      const bool finite = !forward_failed && std::isfinite(batch_loss) &&
                          std::all_of(grad.begin(), grad.end(), [](double g) { return std::isfinite(g); });
      if (!finite) diverge(epoch, "non-finite loss or gradient");
      loss_sum += batch_loss;
      const double inv = 1.0 / static_cast<double>(bsize);
      for (auto& g : grad) g *= inv;
      adam_step(params.values(), grad, state, adam);
      ++result.steps;
    }

    EpochRecord tr{epoch, "train", loss_sum / static_cast<double>(n),
                   static_cast<double>(hits) / static_cast<double>(n)};
    std::vector<double> probs;
    try {
      probs = predict_images(config, params, val_images, threads);
    } catch (const NumericError& e) {
      diverge(epoch, e.what());
    }
    EpochRecord va{epoch, "val", mean_bce(probs, val_labels), accuracy(probs, val_labels)};
    if (!std::isfinite(va.loss)) diverge(epoch, "non-finite validation loss");
    result.curves.push_back(tr);
    result.curves.push_back(va);
    if (tc.on_epoch) tc.on_epoch(tr, va);

    if (va.accuracy > best_accuracy) {
      best_accuracy = va.accuracy;
      result.best = make_checkpoint(config, tc, params, epoch);
      result.best.metrics = {{"train_loss", tr.loss},
                             {"train_accuracy", tr.accuracy},
                             {"val_loss", va.loss},
                             {"val_accuracy", va.accuracy}};
    }
  }
  result.best.extra = {{"epochs_run", tc.epochs}, {"steps", result.steps}};
  return result;
}

std::vector<double> predict_all(const model::ModelConfig& config, const model::ParameterSet& params,
                                std::span<const data::EventRecord> records, std::size_t threads) {
  config.validate();
  return predict_images(config, params, crop_all(config, records), resolve_threads(threads));
}

MetricsReport evaluate(const model::Checkpoint& checkpoint, std::span<const data::EventRecord> records,
                       std::string split, std::size_t threads) {
  if (records.empty()) throw ValidationError("cannot evaluate on an empty split");
  if (checkpoint.params.size() != model::count_params(checkpoint.config)) {
    throw DimensionError("checkpoint holds " + std::to_string(checkpoint.params.size()) +
                         " parameters, its config needs " + std::to_string(model::count_params(checkpoint.config)));
  }
  const auto probs = predict_all(checkpoint.config, checkpoint.params, records, threads);
  std::vector<int> labels;
  labels.reserve(records.size());
  for (const auto& r : records) labels.push_back(r.label);
  return compute_metrics(probs, labels, std::move(split));
}

void export_curves(std::span<const EpochRecord> curves, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write curves: " + path.string());
  out << "epoch,split,loss,accuracy\n";
  char buf[96];
  for (const auto& c : curves) {
    std::snprintf(buf, sizeof(buf), "%d,%s,%.17g,%.17g\n", c.epoch, c.split.c_str(), c.loss, c.accuracy);
    out << buf;
  }
  if (!out) throw IoError("failed writing curves: " + path.string());
}

std::vector<EpochRecord> read_curves(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open curves: " + path.string());
  std::string line;
  std::uint64_t offset = 0;
  if (!std::getline(in, line) || line != "epoch,split,loss,accuracy") {
    throw ParseError("curves header must be 'epoch,split,loss,accuracy'", 0);
  }
  offset += line.size() + 1;
  std::vector<EpochRecord> curves;
  while (std::getline(in, line)) {
    if (line.empty()) {
      offset += 1;
      continue;
    }
    std::stringstream ss(line);
    std::string epoch, split, loss, acc;
    if (!std::getline(ss, epoch, ',') || !std::getline(ss, split, ',') || !std::getline(ss, loss, ',') ||
        !std::getline(ss, acc)) {
      throw ParseError("malformed curves row: " + line, offset);
    }
    try {
      curves.push_back({std::stoi(epoch), split, std::stod(loss), std::stod(acc)});
    } catch (const std::exception&) {
      throw ParseError("malformed curves row: " + line, offset);
    }
    offset += line.size() + 1;
  }
  return curves;
}

}  // namespace qvit::train
