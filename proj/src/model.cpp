#include "pairfreeze/model.hpp"

#include <algorithm>

#include "pairfreeze/kernels.hpp"

namespace pairfreeze {

template <typename T>
Tensor<T> model_forward(Model<T>& model, const Tensor<T>& input, Mode mode, Rng& rng,
                        Tape<T>* tape) {
  if (input.ndim() != 4)
    fail(Error::Kind::shape, "model_forward: input must be [N,C,H,W], got ",
         shape_string(input.shape()));
  if (input.dim(1) != model.input_shape[0] || input.dim(2) != model.input_shape[1] ||
      input.dim(3) != model.input_shape[2])
    fail(Error::Kind::shape, "model_forward: input ", shape_string(input.shape()),
         " does not match model input shape (C,H,W)=(", model.input_shape[0], ",",
         model.input_shape[1], ",", model.input_shape[2], ")");

  std::vector<Tensor<T>> outputs(model.layers.size());
  std::vector<Tensor<T>> args;
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    LayerSpec<T>& layer = model.layers[i];
    args.clear();
    for (int ref : layer.inputs) args.push_back(ref < 0 ? input : outputs[static_cast<std::size_t>(ref)]);
    outputs[i] = layer_forward(layer, static_cast<int>(i), args, mode, rng, tape);
  }
  return outputs.back();
}

template <typename T>
Tensor<T> predict_probs(Model<T>& model, const Tensor<T>& input) {
  Rng rng(0);  // eval consumes no randomness
  Tensor<T> logits = model_forward(model, input, Mode::eval, rng, nullptr);
  Tensor<T> probs = Tensor<T>::zeros(logits.shape());
  kernels::softmax_rows(logits.data(), probs.data(), logits.dim(0), logits.dim(1));
  return probs;
}

template <typename T>
std::vector<int> trainable_layer_indices(const Model<T>& model) {
  std::vector<int> indices;
  for (std::size_t i = 0; i < model.layers.size(); ++i)
    if (has_params(model.layers[i])) indices.push_back(static_cast<int>(i));
  return indices;
}

template <typename T>
void set_trainable(Model<T>& model, const std::vector<int>& layer_indices, bool flag) {
  for (int idx : layer_indices) {
    if (idx < 0 || idx >= static_cast<int>(model.layers.size()))
      fail(Error::Kind::argument, "set_trainable: layer index ", idx, " out of range [0,",
           model.layers.size(), ")");
  }
  for (int idx : layer_indices) {
    for (Parameter<T>& p : model.layers[static_cast<std::size_t>(idx)].params) {
      p.trainable = flag;
      p.tensor.set_requires_grad(flag);
    }
  }
}

template <typename T>
void set_all_trainable(Model<T>& model, bool flag) {
  for (LayerSpec<T>& layer : model.layers) {
    for (Parameter<T>& p : layer.params) {
      p.trainable = flag;
      p.tensor.set_requires_grad(flag);
    }
  }
}

template <typename T>
std::int64_t total_param_count(const Model<T>& model) {
  std::int64_t total = 0;
  for (const LayerSpec<T>& layer : model.layers) total += param_count(layer);
  return total;
}

template <typename T>
std::uint64_t parameter_bytes(const Model<T>& model) {
  std::uint64_t total = 0;
  for (const LayerSpec<T>& layer : model.layers)
    for (const Parameter<T>& p : layer.params) total += p.tensor.bytes();
  return total;
}

template <typename T>
std::vector<std::vector<int>> output_shapes(const Model<T>& model, int batch) {
  std::vector<std::vector<int>> shapes(model.layers.size());
  const std::vector<int> input_shape = {batch, model.input_shape[0], model.input_shape[1],
                                        model.input_shape[2]};
  auto shape_of = [&](int ref) -> const std::vector<int>& {
    return ref < 0 ? input_shape : shapes[static_cast<std::size_t>(ref)];
  };
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const LayerSpec<T>& layer = model.layers[i];
    const std::vector<int>& in = shape_of(layer.inputs.at(0));
    switch (layer.kind) {
      case LayerKind::conv2d:
        shapes[i] = {in[0], layer.filters, in[2], in[3]};
        if (layer.padding == Padding::valid) {
          shapes[i][2] = in[2] - layer.kernel + 1;
          shapes[i][3] = in[3] - layer.kernel + 1;
        }
        break;
      case LayerKind::maxpool:
        shapes[i] = {in[0], in[1], in[2] / layer.pool, in[3] / layer.pool};
        break;
      case LayerKind::flatten:
        shapes[i] = {in[0], in[1] * in[2] * in[3]};
        break;
      case LayerKind::dense:
        shapes[i] = {in[0], layer.units};
        break;
      case LayerKind::globalavgpool:
        shapes[i] = {in[0], in[1]};
        break;
      case LayerKind::concat: {
        int channels = 0;
        for (int ref : layer.inputs) channels += shape_of(ref)[1];
        shapes[i] = {in[0], channels, in[2], in[3]};
        break;
      }
      case LayerKind::dropout:
      case LayerKind::batchnorm:
      case LayerKind::relu:
        shapes[i] = in;
        break;
    }
  }
  return shapes;
}

template <typename T>
std::vector<Tensor<T>> copy_parameters(const Model<T>& model) {
  std::vector<Tensor<T>> values;
  for (const LayerSpec<T>& layer : model.layers) {
    for (const Parameter<T>& p : layer.params) values.push_back(p.tensor.clone());
    if (layer.kind == LayerKind::batchnorm) {
      values.push_back(layer.running_mean.clone());
      values.push_back(layer.running_var.clone());
    }
  }
  return values;
}

template <typename T>
void load_parameters(Model<T>& model, const std::vector<Tensor<T>>& values) {
  std::size_t cursor = 0;
  auto next = [&]() -> const Tensor<T>& {
    if (cursor >= values.size())
      fail(Error::Kind::shape, "load_parameters: snapshot has ", values.size(),
           " tensors, model needs more");
    return values[cursor++];
  };
  for (LayerSpec<T>& layer : model.layers) {
    for (Parameter<T>& p : layer.params) p.tensor.copy_from(next());
    if (layer.kind == LayerKind::batchnorm) {
      layer.running_mean.copy_from(next());
      layer.running_var.copy_from(next());
    }
  }
  if (cursor != values.size())
    fail(Error::Kind::shape, "load_parameters: snapshot has ", values.size() - cursor,
         " unused tensors");
}

template <typename T>
Model<T> clone_model(const Model<T>& model) {
  Model<T> copy;
  copy.arch = model.arch;
  copy.input_shape = model.input_shape;
  copy.num_classes = model.num_classes;
  copy.seed = model.seed;
  copy.layers.reserve(model.layers.size());
  for (const LayerSpec<T>& layer : model.layers) {
    LayerSpec<T> l = layer;  // copies hyperparams and parameter handles
    for (Parameter<T>& p : l.params) p.tensor = p.tensor.clone();
    for (std::size_t i = 0; i < l.params.size(); ++i)
      l.params[i].tensor.set_requires_grad(l.params[i].trainable);
    if (layer.kind == LayerKind::batchnorm) {
      l.running_mean = layer.running_mean.clone();
      l.running_var = layer.running_var.clone();
    }
    copy.layers.push_back(std::move(l));
  }
  return copy;
}

#define PAIRFREEZE_INSTANTIATE_MODEL(T)                                                   \
  template Tensor<T> model_forward<T>(Model<T>&, const Tensor<T>&, Mode, Rng&, Tape<T>*); \
  template Tensor<T> predict_probs<T>(Model<T>&, const Tensor<T>&);                       \
  template std::vector<int> trainable_layer_indices<T>(const Model<T>&);                  \
  template void set_trainable<T>(Model<T>&, const std::vector<int>&, bool);               \
  template void set_all_trainable<T>(Model<T>&, bool);                                    \
  template std::int64_t total_param_count<T>(const Model<T>&);                            \
  template std::uint64_t parameter_bytes<T>(const Model<T>&);                             \
  template std::vector<std::vector<int>> output_shapes<T>(const Model<T>&, int);          \
  template std::vector<Tensor<T>> copy_parameters<T>(const Model<T>&);                    \
  template void load_parameters<T>(Model<T>&, const std::vector<Tensor<T>>&);             \
  template Model<T> clone_model<T>(const Model<T>&);

PAIRFREEZE_INSTANTIATE_MODEL(float)
PAIRFREEZE_INSTANTIATE_MODEL(double)

#undef PAIRFREEZE_INSTANTIATE_MODEL

}  // namespace pairfreeze
