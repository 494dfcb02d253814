#pragma once

#include <cstdint>
#include <map>
#include <utility>

#include "pairfreeze/dataset.hpp"
#include "pairfreeze/model.hpp"
#include "pairfreeze/report.hpp"

namespace pairfreeze {

struct TrainConfig {
  int epochs = 10;
  int batch_size = 64;
  double lr = 0.01;
  double momentum = 0.9;
  std::uint64_t seed = 42;
  bool shuffle = true;
};

struct EpochStats {
  int epoch = 0;
  double mean_loss = 0.0;
  double seconds = 0.0;
};

// SGD momentum buffers, keyed by (layer, param) and allocated lazily the
// first time a trainable parameter takes a step.
class OptimizerState {
 public:
  Tensor<float>& velocity(int layer, int param, const std::vector<int>& shape) {
    auto key = std::make_pair(layer, param);
    auto it = buffers_.find(key);
    if (it == buffers_.end())
      it = buffers_.emplace(key, Tensor<float>::zeros(shape)).first;
    return it->second;
  }
  void clear() { buffers_.clear(); }
  std::size_t size() const { return buffers_.size(); }

 private:
  std::map<std::pair<int, int>, Tensor<float>> buffers_;
};

// v <- momentum*v + grad; p <- p - lr*v, trainable parameters only. Frozen
// parameters are untouched; gradients are cleared afterwards.
void sgd_step(Model<float>& model, OptimizerState& state, double lr, double momentum);

// One seeded, shuffled pass over the dataset in minibatches (the final
// partial batch is trained too). Prints `epoch i/E loss=… secs=…` to stderr.
EpochStats train_epoch(Model<float>& model, const Dataset& dataset, const TrainConfig& cfg,
                       OptimizerState& state, Rng& rng, int epoch_index, int total_epochs);

// Eval-mode accuracy; argmax ties break toward the lowest class index.
double evaluate(Model<float>& model, const Dataset& dataset, int batch_size);

// The baseline: all layers trainable, cfg.epochs epochs, then evaluation.
// Wall time and peak memory cover training plus evaluation.
RunReport train_standard(Model<float>& model, const Dataset& train_set,
                         const Dataset& test_set, const TrainConfig& cfg);

}  // namespace pairfreeze
