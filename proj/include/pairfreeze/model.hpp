#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "pairfreeze/layers.hpp"

namespace pairfreeze {

// Ordered layer graph. Most architectures are plain sequences; the dense-
// block builder wires concat layers to several producers via LayerSpec::inputs.
template <typename T>
struct Model {
  std::string arch;
  std::vector<LayerSpec<T>> layers;
  std::array<int, 3> input_shape{};  // C, H, W
  int num_classes = 0;
  std::uint64_t seed = 0;
};

// Forward pass over the layer graph; returns logits [N, num_classes].
template <typename T>
Tensor<T> model_forward(Model<T>& model, const Tensor<T>& input, Mode mode, Rng& rng,
                        Tape<T>* tape);

// Eval-mode class probabilities (row-wise softmax of the logits), no tape.
template <typename T>
Tensor<T> predict_probs(Model<T>& model, const Tensor<T>& input);

// Indices of layers that own parameters, in layer order. This is the default
// index domain of the freezing schedule.
template <typename T>
std::vector<int> trainable_layer_indices(const Model<T>& model);

// Set the trainable flag on every parameter of the addressed layers.
// Zero-parameter layers are a no-op; out-of-range indices are rejected.
// Gradients still flow *through* frozen layers.
template <typename T>
void set_trainable(Model<T>& model, const std::vector<int>& layer_indices, bool flag);

template <typename T>
void set_all_trainable(Model<T>& model, bool flag);

template <typename T>
std::int64_t total_param_count(const Model<T>& model);

// Bytes held by parameter tensors (the unit used in the snapshot-memory
// comparisons).
template <typename T>
std::uint64_t parameter_bytes(const Model<T>& model);

// Output shape of every layer for a given batch size, by shape algebra only.
template <typename T>
std::vector<std::vector<int>> output_shapes(const Model<T>& model, int batch);

// Full copy of the model's mutable numeric state: every parameter tensor
// followed by batchnorm running stats, in layer order. load_parameters
// restores such a copy into a structurally identical model.
template <typename T>
std::vector<Tensor<T>> copy_parameters(const Model<T>& model);

template <typename T>
void load_parameters(Model<T>& model, const std::vector<Tensor<T>>& values);

template <typename T>
Model<T> clone_model(const Model<T>& model);

}  // namespace pairfreeze
