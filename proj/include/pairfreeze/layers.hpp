#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pairfreeze/autograd.hpp"
#include "pairfreeze/tensor.hpp"

namespace pairfreeze {

enum class LayerKind {
  conv2d,
  maxpool,
  dropout,
  flatten,
  dense,
  batchnorm,
  globalavgpool,
  concat,
  relu,
};

const char* to_string(LayerKind kind);

// Named, freezable tensor. Freezing flips both `trainable` and the tensor's
// requires_grad, so backward skips the gradient buffer entirely while still
// propagating through the layer.
template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> tensor;
  bool trainable = true;
};

// One layer: kind + hyperparameters + parameters. `inputs` holds producer
// layer indices (-1 is the model input); sequential layers reference the
// previous layer, concat lists several producers.
template <typename T>
struct LayerSpec {
  LayerKind kind = LayerKind::relu;
  std::string name;
  std::vector<int> inputs;

  int filters = 0;
  int kernel = 3;
  Padding padding = Padding::same;
  bool relu_after = false;  // conv/dense fused activation (keeps layer counts

                            // aligned with the sequential architectures)
  int pool = 2;
  double rate = 0.0;
  int units = 0;
  double bn_momentum = 0.1;
  double bn_epsilon = 1e-5;

  std::vector<Parameter<T>> params;
  // Batchnorm running statistics: layer state, not parameters. They update
  // during train-mode forward regardless of freezing and are reported
  // separately from param_count.
  Tensor<T> running_mean;
  Tensor<T> running_var;
};

// Dispatch to the corresponding tensor op; shape failures are annotated with
// the layer's index and kind.
template <typename T>
Tensor<T> layer_forward(LayerSpec<T>& layer, int layer_index,
                        const std::vector<Tensor<T>>& inputs, Mode mode, Rng& rng,
                        Tape<T>* tape);

// Trainable parameter count: conv (kh*kw*cin + 1)*cout, dense (d+1)*u,
// batchnorm 2*c, everything else 0.
template <typename T>
std::int64_t param_count(const LayerSpec<T>& layer);

// Non-trainable state elements (batchnorm running stats).
template <typename T>
std::int64_t state_count(const LayerSpec<T>& layer);

template <typename T>
bool has_params(const LayerSpec<T>& layer) {
  return !layer.params.empty();
}

}  // namespace pairfreeze
