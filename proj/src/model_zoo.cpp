#include "pairfreeze/model_zoo.hpp"

#include <cmath>

namespace pairfreeze {
namespace {

// Parameter streams fork from the model seed as layer_index * 4 + slot, so
// adding a layer never perturbs the initialization of the ones before it.
template <typename T>
class Builder {
 public:
  Builder(std::string arch, std::array<int, 3> input_shape, int num_classes,
          std::uint64_t seed)
      : base_(seed) {
    model_.arch = std::move(arch);
    model_.input_shape = input_shape;
    model_.num_classes = num_classes;
    model_.seed = seed;
  }

  int conv(int from, int cin, int filters, int kernel, bool relu_after,
           const std::string& name) {
    LayerSpec<T> l;
    l.kind = LayerKind::conv2d;
    l.name = name;
    l.inputs = {from};
    l.filters = filters;
    l.kernel = kernel;
    l.padding = Padding::same;
    l.relu_after = relu_after;
    const int fan_in = cin * kernel * kernel;
    l.params.push_back({"weight", he_uniform({filters, cin, kernel, kernel}, fan_in), true});
    l.params.push_back({"bias", Tensor<T>::zeros({filters}), true});
    return push(std::move(l));
  }

  int dense(int from, int d_in, int units, bool relu_after, const std::string& name) {
    LayerSpec<T> l;
    l.kind = LayerKind::dense;
    l.name = name;
    l.inputs = {from};
    l.units = units;
    l.relu_after = relu_after;
    l.params.push_back({"weight", he_uniform({d_in, units}, d_in), true});
    l.params.push_back({"bias", Tensor<T>::zeros({units}), true});
    return push(std::move(l));
  }

  int batchnorm(int from, int channels, const std::string& name) {
    LayerSpec<T> l;
    l.kind = LayerKind::batchnorm;
    l.name = name;
    l.inputs = {from};
    l.params.push_back({"gamma", Tensor<T>::full({channels}, T(1)), true});
    l.params.push_back({"beta", Tensor<T>::zeros({channels}), true});
    l.running_mean = Tensor<T>::zeros({channels});
    l.running_var = Tensor<T>::full({channels}, T(1));
    return push(std::move(l));
  }

  int maxpool(int from, const std::string& name) {
    LayerSpec<T> l;
    l.kind = LayerKind::maxpool;
    l.name = name;
    l.inputs = {from};
    l.pool = 2;
    return push(std::move(l));
  }

  int dropout(int from, double rate, const std::string& name) {
    LayerSpec<T> l;
    l.kind = LayerKind::dropout;
    l.name = name;
    l.inputs = {from};
    l.rate = rate;
    return push(std::move(l));
  }

  int flatten(int from) {
    LayerSpec<T> l;
    l.kind = LayerKind::flatten;
    l.name = "flatten";
    l.inputs = {from};
    return push(std::move(l));
  }

  int relu(int from, const std::string& name) {
    LayerSpec<T> l;
    l.kind = LayerKind::relu;
    l.name = name;
    l.inputs = {from};
    return push(std::move(l));
  }

  int gap(int from) {
    LayerSpec<T> l;
    l.kind = LayerKind::globalavgpool;
    l.name = "gap";
    l.inputs = {from};
    return push(std::move(l));
  }

  int concat(std::vector<int> froms, const std::string& name) {
    LayerSpec<T> l;
    l.kind = LayerKind::concat;
    l.name = name;
    l.inputs = std::move(froms);
    return push(std::move(l));
  }

  Model<T> finish() { return std::move(model_); }

 private:
  int push(LayerSpec<T>&& l) {
    model_.layers.push_back(std::move(l));
    return static_cast<int>(model_.layers.size()) - 1;
  }

  // One random tensor per layer (the weight); its stream index is the layer
  // index the tensor is being built for.
  Tensor<T> he_uniform(std::vector<int> shape, int fan_in) {
    const std::uint64_t layer_index = model_.layers.size();
    Rng stream = base_.fork(layer_index);
    Tensor<T> t = Tensor<T>::zeros(std::move(shape));
    const double limit = std::sqrt(6.0 / fan_in);
    T* p = t.data();
    const std::size_t n = t.numel();
    for (std::size_t i = 0; i < n; ++i)
      p[i] = static_cast<T>(stream.uniform(-limit, limit));
    return t;
  }

  Model<T> model_;
  Rng base_;
};

void require_divisible(const std::array<int, 3>& input_shape, int divisor, const char* arch) {
  if (input_shape[1] % divisor != 0 || input_shape[2] % divisor != 0)
    fail(Error::Kind::shape, arch, ": spatial dims ", input_shape[1], "x", input_shape[2],
         " must be divisible by ", divisor);
  if (input_shape[0] <= 0 || input_shape[1] <= 0 || input_shape[2] <= 0)
    fail(Error::Kind::shape, arch, ": invalid input shape");
}

}  // namespace

template <typename T>
Model<T> build_cnn12(std::array<int, 3> input_shape, int num_classes, std::uint64_t seed) {
  require_divisible(input_shape, 4, "cnn12");
  Builder<T> b("cnn12", input_shape, num_classes, seed);
  const int c = input_shape[0], h = input_shape[1], w = input_shape[2];
  int x = b.conv(-1, c, 32, 3, true, "conv1");
  x = b.conv(x, 32, 32, 3, true, "conv2");
  x = b.maxpool(x, "pool1");
  x = b.dropout(x, 0.25, "drop1");
  x = b.conv(x, 32, 64, 3, true, "conv3");
  x = b.conv(x, 64, 64, 3, true, "conv4");
  x = b.maxpool(x, "pool2");
  x = b.dropout(x, 0.25, "drop2");
  x = b.flatten(x);
  x = b.dense(x, 64 * (h / 4) * (w / 4), 512, true, "fc1");
  x = b.dropout(x, 0.5, "drop3");
  b.dense(x, 512, num_classes, false, "fc2");
  return b.finish();
}

template <typename T>
Model<T> build_vgg_style(std::array<int, 3> input_shape, int num_classes, std::uint64_t seed) {
  require_divisible(input_shape, 32, "vgg16");
  Builder<T> b("vgg16", input_shape, num_classes, seed);
  static const int plan_convs[5] = {2, 2, 3, 3, 3};
  static const int plan_filters[5] = {64, 128, 256, 512, 512};
  int channels = input_shape[0];
  int x = -1;
  for (int block = 0; block < 5; ++block) {
    for (int i = 0; i < plan_convs[block]; ++i) {
      x = b.conv(x, channels, plan_filters[block], 3, true,
                 "conv" + std::to_string(block + 1) + "_" + std::to_string(i + 1));
      channels = plan_filters[block];
    }
    x = b.maxpool(x, "pool" + std::to_string(block + 1));
  }
  const int spatial = (input_shape[1] / 32) * (input_shape[2] / 32);
  x = b.flatten(x);
  x = b.dense(x, channels * spatial, 512, true, "fc1");
  x = b.dropout(x, 0.5, "drop");
  b.dense(x, 512, num_classes, false, "fc2");
  return b.finish();
}

template <typename T>
Model<T> build_groupconv_net(std::array<int, 3> input_shape, int num_classes,
                             std::uint64_t seed) {
  require_divisible(input_shape, 16, "resnext");
  Builder<T> b("resnext", input_shape, num_classes, seed);
  int channels = input_shape[0];
  int x = -1;
  int filters = 64;
  for (int group = 1; group <= 4; ++group) {
    for (int i = 1; i <= 2; ++i) {
      const std::string tag = std::to_string(group) + "_" + std::to_string(i);
      x = b.conv(x, channels, filters, 3, false, "conv" + tag);
      channels = filters;
      x = b.batchnorm(x, channels, "bn" + tag);
      x = b.relu(x, "relu" + tag);
    }
    x = b.maxpool(x, "pool" + std::to_string(group));
    filters *= 2;
  }
  x = b.gap(x);
  b.dense(x, channels, num_classes, false, "fc");
  return b.finish();
}

template <typename T>
Model<T> build_densenet_style(std::array<int, 3> input_shape, int num_classes,
                              std::uint64_t seed, int growth_rate,
                              std::vector<int> block_sizes) {
  if (growth_rate < 1) fail(Error::Kind::argument, "densenet: growth_rate must be >= 1");
  if (block_sizes.empty()) fail(Error::Kind::argument, "densenet: needs at least one block");
  const int transitions = static_cast<int>(block_sizes.size()) - 1;
  require_divisible(input_shape, 1 << transitions, "densenet");

  Builder<T> b("densenet", input_shape, num_classes, seed);
  int channels = 2 * growth_rate;
  int x = b.conv(-1, input_shape[0], channels, 3, false, "stem_conv");
  x = b.batchnorm(x, channels, "stem_bn");
  x = b.relu(x, "stem_relu");

  for (std::size_t block = 0; block < block_sizes.size(); ++block) {
    for (int layer = 1; layer <= block_sizes[block]; ++layer) {
      const std::string tag = std::to_string(block + 1) + "_" + std::to_string(layer);
      int y = b.conv(x, channels, 4 * growth_rate, 1, false, "bottleneck" + tag);
      y = b.batchnorm(y, 4 * growth_rate, "bn_b" + tag);
      y = b.relu(y, "relu_b" + tag);
      y = b.conv(y, 4 * growth_rate, growth_rate, 3, false, "conv" + tag);
      y = b.batchnorm(y, growth_rate, "bn_c" + tag);
      y = b.relu(y, "relu_c" + tag);
      x = b.concat({x, y}, "concat" + tag);
      channels += growth_rate;
    }
    if (block + 1 < block_sizes.size()) {
      x = b.maxpool(x, "trans_pool" + std::to_string(block + 1));
      const int halved = channels / 2;
      x = b.conv(x, channels, halved, 1, false, "trans_conv" + std::to_string(block + 1));
      channels = halved;
    }
  }
  x = b.gap(x);
  b.dense(x, channels, num_classes, false, "fc");
  return b.finish();
}

const std::vector<std::string>& architecture_names() {
  static const std::vector<std::string> names = {"cnn12", "vgg16", "resnext", "densenet"};
  return names;
}

template <typename T>
Model<T> build_by_name(const std::string& arch, std::array<int, 3> input_shape,
                       int num_classes, std::uint64_t seed) {
  if (arch == "cnn12") return build_cnn12<T>(input_shape, num_classes, seed);
  if (arch == "vgg16") return build_vgg_style<T>(input_shape, num_classes, seed);
  if (arch == "resnext") return build_groupconv_net<T>(input_shape, num_classes, seed);
  if (arch == "densenet") return build_densenet_style<T>(input_shape, num_classes, seed);
  fail(Error::Kind::argument, "unknown architecture '", arch,
       "' (expected cnn12, vgg16, resnext or densenet)");
}

#define PAIRFREEZE_INSTANTIATE_ZOO(T)                                                       \
  template Model<T> build_cnn12<T>(std::array<int, 3>, int, std::uint64_t);                 \
  template Model<T> build_vgg_style<T>(std::array<int, 3>, int, std::uint64_t);             \
  template Model<T> build_groupconv_net<T>(std::array<int, 3>, int, std::uint64_t);         \
  template Model<T> build_densenet_style<T>(std::array<int, 3>, int, std::uint64_t, int,    \
                                            std::vector<int>);                              \
  template Model<T> build_by_name<T>(const std::string&, std::array<int, 3>, int,           \
                                     std::uint64_t);

PAIRFREEZE_INSTANTIATE_ZOO(float)
PAIRFREEZE_INSTANTIATE_ZOO(double)

#undef PAIRFREEZE_INSTANTIATE_ZOO

}  // namespace pairfreeze
