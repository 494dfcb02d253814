#include "pairfreeze/train.hpp"

#include <chrono>
#include <cstdio>
#include <numeric>

namespace pairfreeze {

void sgd_step(Model<float>& model, OptimizerState& state, double lr, double momentum) {
  for (std::size_t li = 0; li < model.layers.size(); ++li) {
    LayerSpec<float>& layer = model.layers[li];
    for (std::size_t pi = 0; pi < layer.params.size(); ++pi) {
      Parameter<float>& p = layer.params[pi];
      if (!p.trainable) {
        p.tensor.drop_grad();  // a stale buffer must never feed an update
        continue;
      }
      if (!p.tensor.has_grad())
        fail(Error::Kind::state, "sgd_step before backward: parameter '", layer.name, ".",
             p.name, "' has no gradient");
      Tensor<float>& v =
          state.velocity(static_cast<int>(li), static_cast<int>(pi), p.tensor.shape());
      float* vel = v.data();
      float* w = p.tensor.data();
      const float* g = p.tensor.grad();
      const float m = static_cast<float>(momentum);
      const float step = static_cast<float>(lr);
      const std::size_t n = p.tensor.numel();
      for (std::size_t i = 0; i < n; ++i) {
        vel[i] = m * vel[i] + g[i];
        w[i] -= step * vel[i];
      }
      p.tensor.drop_grad();
    }
  }
}

EpochStats train_epoch(Model<float>& model, const Dataset& dataset, const TrainConfig& cfg,
                       OptimizerState& state, Rng& rng, int epoch_index, int total_epochs) {
  if (dataset.size() == 0) fail(Error::Kind::argument, "train_epoch: empty dataset");
  if (cfg.batch_size < 1 || cfg.batch_size > dataset.size())
    fail(Error::Kind::argument, "train_epoch: batch_size ", cfg.batch_size,
         " invalid for dataset of ", dataset.size());

  const auto t0 = std::chrono::steady_clock::now();

  std::vector<int> order(static_cast<std::size_t>(dataset.size()));
  std::iota(order.begin(), order.end(), 0);
  if (cfg.shuffle) rng.shuffle(order);

  double loss_sum = 0.0;
  const int n = dataset.size();
  for (int start = 0; start < n; start += cfg.batch_size) {
    const int count = std::min(cfg.batch_size, n - start);
    Tensor<float> images = gather_images(dataset, order.data() + start, count);
    std::vector<int> labels = gather_labels(dataset, order.data() + start, count);

    Tape<float> tape;
    Tensor<float> logits = model_forward(model, images, Mode::train, rng, &tape);
    LossResult<float> loss = softmax_cross_entropy(&tape, logits, labels);
    tape.backward(loss.loss);
    sgd_step(model, state, cfg.lr, cfg.momentum);
    loss_sum += static_cast<double>(loss.loss.item()) * count;
  }

  const auto t1 = std::chrono::steady_clock::now();
  EpochStats stats;
  stats.epoch = epoch_index;
  stats.mean_loss = loss_sum / n;
  stats.seconds = std::chrono::duration<double>(t1 - t0).count();
  std::fprintf(stderr, "epoch %d/%d loss=%.6f secs=%.3f\n", epoch_index, total_epochs,
               stats.mean_loss, stats.seconds);
  return stats;
}

double evaluate(Model<float>& model, const Dataset& dataset, int batch_size) {
  if (dataset.size() == 0) fail(Error::Kind::argument, "evaluate: empty dataset");
  const int n = dataset.size();
  const int bs = std::min(batch_size < 1 ? 64 : batch_size, n);

  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);

  int correct = 0;
  for (int start = 0; start < n; start += bs) {
    const int count = std::min(bs, n - start);
    Tensor<float> images = gather_images(dataset, order.data() + start, count);
    Tensor<float> probs = predict_probs(model, images);
    const int k = probs.dim(1);
    for (int r = 0; r < count; ++r) {
      const float* row = probs.data() + static_cast<std::ptrdiff_t>(r) * k;
      int best = 0;
      for (int c = 1; c < k; ++c)
        if (row[c] > row[best]) best = c;  // ties go to the lowest index
      if (best == dataset.labels[static_cast<std::size_t>(order[static_cast<std::size_t>(start + r)])])
        ++correct;
    }
  }
  return static_cast<double>(correct) / n;
}

RunReport train_standard(Model<float>& model, const Dataset& train_set,
                         const Dataset& test_set, const TrainConfig& cfg) {
  set_all_trainable(model, true);

  RunReport report;
  report.method = "standard";
  report.architecture = model.arch;
  report.dataset = train_set.name;
  report.epochs = cfg.epochs;
  report.batch_size = cfg.batch_size;
  report.lr = cfg.lr;
  report.momentum = cfg.momentum;
  report.seed = cfg.seed;
  report.budget = "";

  Measurement m = measure([&] {
    OptimizerState state;
    Rng rng = Rng(cfg.seed).fork(0x7261696E);  // training stream
    for (int e = 1; e <= cfg.epochs; ++e) {
      EpochStats stats = train_epoch(model, train_set, cfg, state, rng, e, cfg.epochs);
      report.epoch_losses.push_back(stats.mean_loss);
    }
    report.accuracy = evaluate(model, test_set, cfg.batch_size);
  });
  report.total_training_seconds = m.seconds;
  report.peak_memory_bytes = m.peak_bytes;
  return report;
}

}  // namespace pairfreeze
