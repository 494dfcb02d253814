#pragma once

#include <optional>

#include "pairfreeze/train.hpp"

namespace pairfreeze {

// One schedule step: the early (student) and late (teacher) positions in the
// schedule's index domain, 1-based. The middle position of an odd-sized
// domain trains alone.
struct Stage {
  int index = 0;
  int student = 0;
  std::optional<int> teacher;
};

// The schedule walks the domain inward: stage k trains positions
// {k, n+1-k}, so every position lands in exactly one of ceil(n/2) stages.
enum class ScheduleMode { trainable_only, all_layers };

struct Schedule {
  std::vector<Stage> stages;
  int n = 0;
  ScheduleMode mode = ScheduleMode::trainable_only;
};

Schedule make_schedule(int n, ScheduleMode mode = ScheduleMode::trainable_only);

enum class BudgetMode { per_stage, split };

struct L2lOptions {
  ScheduleMode schedule_mode = ScheduleMode::trainable_only;
  // per_stage: cfg.epochs per stage. split: cfg.epochs divided across stages
  // (remainder to the last stage).
  BudgetMode budget = BudgetMode::per_stage;
};

// Full copy of the model's numeric state at the end of a stage
// (copy_parameters order).
struct Snapshot {
  int stage = 0;
  std::vector<Tensor<float>> values;
};

struct L2lResult {
  RunReport report;
  std::vector<Snapshot> snapshots;
};

// Staged frozen training: per stage, only the stage's layers are trainable
// (velocity buffers reset at stage boundaries, parameters continue from the
// previous stage), a snapshot is captured at stage end, and the final
// accuracy is the snapshot ensemble evaluated on the test set.
L2lResult train_l2l(Model<float>& model, const Dataset& train_set, const Dataset& test_set,
                    const TrainConfig& cfg, const L2lOptions& options);

struct EnsembleResult {
  Tensor<float> probs;  // mean of per-snapshot softmax rows
  std::vector<int> predictions;
};

// Restore every snapshot into a model of `architecture`'s structure (all
// restored models are held concurrently), average their eval-mode softmax
// probabilities elementwise, argmax per row with ties to the lowest index.
EnsembleResult ensemble_predict(const std::vector<Snapshot>& snapshots,
                                const Model<float>& architecture,
                                const Tensor<float>& inputs);

double ensemble_accuracy(const std::vector<Snapshot>& snapshots,
                         const Model<float>& architecture, const Dataset& dataset,
                         int batch_size);

}  // namespace pairfreeze
