#include "pairfreeze/layers.hpp"

namespace pairfreeze {

const char* to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::maxpool: return "maxpool";
    case LayerKind::dropout: return "dropout";
    case LayerKind::flatten: return "flatten";
    case LayerKind::dense: return "dense";
    case LayerKind::batchnorm: return "batchnorm";
    case LayerKind::globalavgpool: return "globalavgpool";
    case LayerKind::concat: return "concat";
    case LayerKind::relu: return "relu";
  }
  return "?";
}

template <typename T>
Tensor<T> layer_forward(LayerSpec<T>& layer, int layer_index,
                        const std::vector<Tensor<T>>& inputs, Mode mode, Rng& rng,
                        Tape<T>* tape) {
  try {
    switch (layer.kind) {
      case LayerKind::conv2d: {
        Tensor<T> out =
            conv2d(tape, inputs.at(0), layer.params[0].tensor, layer.params[1].tensor,
                   layer.padding);
        return layer.relu_after ? relu(tape, out) : out;
      }
      case LayerKind::maxpool:
        return max_pool2d(tape, inputs.at(0), layer.pool);
      case LayerKind::dropout:
        return dropout(tape, inputs.at(0), layer.rate, mode, rng);
      case LayerKind::flatten:
        return flatten(tape, inputs.at(0));
      case LayerKind::dense: {
        Tensor<T> out =
            dense(tape, inputs.at(0), layer.params[0].tensor, layer.params[1].tensor);
        return layer.relu_after ? relu(tape, out) : out;
      }
      case LayerKind::batchnorm:
        return batch_norm2d(tape, inputs.at(0), layer.params[0].tensor,
                            layer.params[1].tensor, layer.running_mean, layer.running_var,
                            mode, layer.bn_momentum, layer.bn_epsilon);
      case LayerKind::globalavgpool:
        return global_avg_pool(tape, inputs.at(0));
      case LayerKind::concat:
        return concat_channels(tape, inputs);
      case LayerKind::relu:
        return relu(tape, inputs.at(0));
    }
    fail(Error::Kind::state, "unknown layer kind");
  } catch (const Error& e) {
    fail(e.kind(), "layer ", layer_index, " (", to_string(layer.kind), "): ", e.what());
  }
}

template <typename T>
std::int64_t param_count(const LayerSpec<T>& layer) {
  switch (layer.kind) {
    case LayerKind::conv2d: {
      const auto& w = layer.params[0].tensor;  // [cout, cin, kh, kw]
      return (static_cast<std::int64_t>(w.dim(2)) * w.dim(3) * w.dim(1) + 1) * w.dim(0);
    }
    case LayerKind::dense: {
      const auto& w = layer.params[0].tensor;  // [d, u]
      return (static_cast<std::int64_t>(w.dim(0)) + 1) * w.dim(1);
    }
    case LayerKind::batchnorm:
      return 2 * static_cast<std::int64_t>(layer.params[0].tensor.dim(0));
    default:
      return 0;
  }
}

template <typename T>
std::int64_t state_count(const LayerSpec<T>& layer) {
  if (layer.kind != LayerKind::batchnorm) return 0;
  return 2 * static_cast<std::int64_t>(layer.running_mean.dim(0));
}

#define PAIRFREEZE_INSTANTIATE_LAYERS(T)                                             \
  template Tensor<T> layer_forward<T>(LayerSpec<T>&, int, const std::vector<Tensor<T>>&, \
                                      Mode, Rng&, Tape<T>*);                         \
  template std::int64_t param_count<T>(const LayerSpec<T>&);                         \
  template std::int64_t state_count<T>(const LayerSpec<T>&);

PAIRFREEZE_INSTANTIATE_LAYERS(float)
PAIRFREEZE_INSTANTIATE_LAYERS(double)

#undef PAIRFREEZE_INSTANTIATE_LAYERS

}  // namespace pairfreeze
