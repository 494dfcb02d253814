#include "pairfreeze/l2l.hpp"

#include <chrono>
#include <numeric>

namespace pairfreeze {

Schedule make_schedule(int n, ScheduleMode mode) {
  if (n < 1) fail(Error::Kind::argument, "make_schedule: need at least one layer, got ", n);
  Schedule schedule;
  schedule.n = n;
  schedule.mode = mode;
  for (int k = 1; k <= (n + 1) / 2; ++k) {
    Stage stage;
    stage.index = k;
    stage.student = k;
    const int teacher = n + 1 - k;
    if (teacher != k) stage.teacher = teacher;
    schedule.stages.push_back(stage);
  }
  return schedule;
}

namespace {

std::vector<Model<float>> restore_snapshots(const std::vector<Snapshot>& snapshots,
                                            const Model<float>& architecture) {
  std::vector<Model<float>> models;
  models.reserve(snapshots.size());
  for (const Snapshot& snap : snapshots) {
    Model<float> m = clone_model(architecture);
    load_parameters(m, snap.values);
    models.push_back(std::move(m));
  }
  return models;
}

EnsembleResult ensemble_over_models(std::vector<Model<float>>& models,
                                    const Tensor<float>& inputs) {
  Tensor<float> mean;
  for (Model<float>& m : models) {
    Tensor<float> probs = predict_probs(m, inputs);
    if (!mean.defined()) {
      mean = probs.clone();
    } else {
      float* acc = mean.data();
      const float* p = probs.data();
      for (std::size_t i = 0; i < mean.numel(); ++i) acc[i] += p[i];
    }
  }
  const float inv = 1.0f / static_cast<float>(models.size());
  for (std::size_t i = 0; i < mean.numel(); ++i) mean.data()[i] *= inv;

  EnsembleResult result;
  const int n = mean.dim(0), k = mean.dim(1);
  result.predictions.resize(static_cast<std::size_t>(n));
  for (int r = 0; r < n; ++r) {
    const float* row = mean.data() + static_cast<std::ptrdiff_t>(r) * k;
    int best = 0;
    for (int c = 1; c < k; ++c)
      if (row[c] > row[best]) best = c;
    result.predictions[static_cast<std::size_t>(r)] = best;
  }
  result.probs = std::move(mean);
  return result;
}

}  // namespace

EnsembleResult ensemble_predict(const std::vector<Snapshot>& snapshots,
                                const Model<float>& architecture,
                                const Tensor<float>& inputs) {
  if (snapshots.empty()) fail(Error::Kind::argument, "ensemble_predict: no snapshots");
  std::vector<Model<float>> models = restore_snapshots(snapshots, architecture);
  return ensemble_over_models(models, inputs);
}

double ensemble_accuracy(const std::vector<Snapshot>& snapshots,
                         const Model<float>& architecture, const Dataset& dataset,
                         int batch_size) {
  if (snapshots.empty()) fail(Error::Kind::argument, "ensemble_accuracy: no snapshots");
  if (dataset.size() == 0) fail(Error::Kind::argument, "ensemble_accuracy: empty dataset");

  std::vector<Model<float>> models = restore_snapshots(snapshots, architecture);
  const int n = dataset.size();
  const int bs = std::min(batch_size < 1 ? 64 : batch_size, n);
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);

  int correct = 0;
  for (int start = 0; start < n; start += bs) {
    const int count = std::min(bs, n - start);
    Tensor<float> images = gather_images(dataset, order.data() + start, count);
    EnsembleResult res = ensemble_over_models(models, images);
    for (int r = 0; r < count; ++r) {
      if (res.predictions[static_cast<std::size_t>(r)] ==
          dataset.labels[static_cast<std::size_t>(start + r)])
        ++correct;
    }
  }
  return static_cast<double>(correct) / n;
}

L2lResult train_l2l(Model<float>& model, const Dataset& train_set, const Dataset& test_set,
                    const TrainConfig& cfg, const L2lOptions& options) {
  // The schedule's index domain: parameterized layers by default, or every
  // layer when mimicking the paper's literal whole-network indexing.
  std::vector<int> domain;
  if (options.schedule_mode == ScheduleMode::trainable_only) {
    domain = trainable_layer_indices(model);
  } else {
    domain.resize(model.layers.size());
    std::iota(domain.begin(), domain.end(), 0);
  }
  if (domain.empty())
    fail(Error::Kind::state, "train_l2l: model '", model.arch, "' has no trainable layers");

  Schedule schedule = make_schedule(static_cast<int>(domain.size()), options.schedule_mode);
  const int n_stages = static_cast<int>(schedule.stages.size());

  std::vector<int> stage_epochs(static_cast<std::size_t>(n_stages), cfg.epochs);
  if (options.budget == BudgetMode::split) {
    const int base = cfg.epochs / n_stages;
    for (int& e : stage_epochs) e = base;
    stage_epochs.back() += cfg.epochs - base * n_stages;
  }

  L2lResult result;
  RunReport& report = result.report;
  report.method = "l2l";
  report.architecture = model.arch;
  report.dataset = train_set.name;
  report.epochs = cfg.epochs;
  report.batch_size = cfg.batch_size;
  report.lr = cfg.lr;
  report.momentum = cfg.momentum;
  report.seed = cfg.seed;
  report.budget = options.budget == BudgetMode::per_stage ? "per-stage" : "split";

  Measurement m = measure([&] {
    Rng rng = Rng(cfg.seed).fork(0x7261696E);  // same training stream rule as standard
    for (int si = 0; si < n_stages; ++si) {
      const Stage& stage = schedule.stages[static_cast<std::size_t>(si)];
      std::vector<int> stage_layers = {domain[static_cast<std::size_t>(stage.student - 1)]};
      if (stage.teacher)
        stage_layers.push_back(domain[static_cast<std::size_t>(*stage.teacher - 1)]);

      set_all_trainable(model, false);
      set_trainable(model, stage_layers, true);

      const auto t0 = std::chrono::steady_clock::now();
      OptimizerState state;  // velocity resets with the trainable set
      StageRecord record;
      record.stage = stage.index;
      record.layers = stage_layers;
      record.epochs = stage_epochs[static_cast<std::size_t>(si)];
      for (int e = 1; e <= record.epochs; ++e) {
        EpochStats stats =
            train_epoch(model, train_set, cfg, state, rng, e, record.epochs);
        report.epoch_losses.push_back(stats.mean_loss);
        record.final_loss = stats.mean_loss;
      }
      const auto t1 = std::chrono::steady_clock::now();
      record.seconds = std::chrono::duration<double>(t1 - t0).count();
      report.stages.push_back(std::move(record));

      result.snapshots.push_back({stage.index, copy_parameters(model)});
    }
    report.accuracy =
        ensemble_accuracy(result.snapshots, model, test_set, cfg.batch_size);
  });
  report.total_training_seconds = m.seconds;
  report.peak_memory_bytes = m.peak_bytes;

  set_all_trainable(model, true);  // leave the model in its normal state
  return result;
}

}  // namespace pairfreeze
