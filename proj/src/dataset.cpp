#include "pairfreeze/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "pairfreeze/rng.hpp"

namespace pairfreeze {

namespace {

constexpr int kCifarHw = 32;

std::vector<unsigned char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Error::Kind::io, "cannot open ", path);
  return std::vector<unsigned char>(std::istreambuf_iterator<char>(in),
                                    std::istreambuf_iterator<char>());
}

}  // namespace

Dataset parse_cifar_records(const std::vector<unsigned char>& bytes, CifarVariant variant) {
  const int label_bytes = variant == CifarVariant::cifar100 ? 2 : 1;
  const int record_size = label_bytes + kCifarPixelBytes;
  const int num_classes = variant == CifarVariant::cifar100 ? 100 : 10;

  if (bytes.empty()) fail(Error::Kind::parse, "cifar: zero records (empty input)");
  if (bytes.size() % static_cast<std::size_t>(record_size) != 0)
    fail(Error::Kind::parse, "cifar: input length ", bytes.size(),
         " is not a multiple of the record size ", record_size, " (truncated at byte offset ",
         bytes.size() - bytes.size() % static_cast<std::size_t>(record_size), ")");

  const int n = static_cast<int>(bytes.size() / static_cast<std::size_t>(record_size));
  Dataset ds;
  ds.num_classes = num_classes;
  ds.name = variant == CifarVariant::cifar100 ? "cifar100" : "cifar10";
  ds.labels.resize(static_cast<std::size_t>(n));
  ds.images = Tensor<float>::zeros({n, 3, kCifarHw, kCifarHw});

  float* img = ds.images.data();
  for (int r = 0; r < n; ++r) {
    const unsigned char* rec = bytes.data() + static_cast<std::size_t>(r) * record_size;
    const int label = rec[label_bytes - 1];  // fine label for cifar100
    if (label >= num_classes)
      fail(Error::Kind::parse, "cifar: label ", label, " out of range [0,", num_classes,
           ") in record ", r, " (byte offset ",
           static_cast<std::size_t>(r) * record_size + label_bytes - 1, ")");
    ds.labels[static_cast<std::size_t>(r)] = label;
    const unsigned char* px = rec + label_bytes;
    float* dst = img + static_cast<std::size_t>(r) * kCifarPixelBytes;
    for (int i = 0; i < kCifarPixelBytes; ++i)
      dst[i] = static_cast<float>(px[i]) * (1.0f / 255.0f);
  }
  return ds;
}

void append_cifar_record(std::vector<unsigned char>& out, CifarVariant variant, int label,
                         const unsigned char* pixels, int coarse) {
  if (variant == CifarVariant::cifar100) out.push_back(static_cast<unsigned char>(coarse));
  out.push_back(static_cast<unsigned char>(label));
  out.insert(out.end(), pixels, pixels + kCifarPixelBytes);
}

Dataset load_cifar_dir(const std::string& data_dir, CifarVariant variant, bool train) {
  std::vector<std::string> files;
  if (variant == CifarVariant::cifar100) {
    files.push_back(data_dir + (train ? "/train.bin" : "/test.bin"));
  } else if (train) {
    for (int i = 1; i <= 5; ++i)
      files.push_back(data_dir + "/data_batch_" + std::to_string(i) + ".bin");
  } else {
    files.push_back(data_dir + "/test_batch.bin");
  }

  std::vector<unsigned char> bytes;
  for (const std::string& f : files) {
    std::vector<unsigned char> chunk = read_file(f);
    bytes.insert(bytes.end(), chunk.begin(), chunk.end());
  }
  Dataset ds = parse_cifar_records(bytes, variant);
  ds.name += train ? "/train" : "/test";
  return ds;
}

Dataset subset(const Dataset& dataset, const std::vector<int>& classes, int per_class,
               std::uint64_t seed) {
  if (classes.empty()) fail(Error::Kind::argument, "subset: no classes requested");
  if (per_class < 1) fail(Error::Kind::argument, "subset: per_class must be >= 1");

  Rng rng(seed);
  std::vector<int> chosen;
  std::string mapping;
  for (std::size_t c = 0; c < classes.size(); ++c) {
    std::vector<int> pool;
    for (int i = 0; i < dataset.size(); ++i)
      if (dataset.labels[static_cast<std::size_t>(i)] == classes[c]) pool.push_back(i);
    if (static_cast<int>(pool.size()) < per_class)
      fail(Error::Kind::argument, "subset: class ", classes[c], " has ", pool.size(),
           " samples, need ", per_class);
    rng.shuffle(pool);
    pool.resize(static_cast<std::size_t>(per_class));
    std::sort(pool.begin(), pool.end());  // keep file order inside a class
    chosen.insert(chosen.end(), pool.begin(), pool.end());
    if (c) mapping += ",";
    mapping += std::to_string(classes[c]) + "->" + std::to_string(c);
  }

  const int h = dataset.images.dim(2), w = dataset.images.dim(3);
  Dataset out;
  out.num_classes = static_cast<int>(classes.size());
  out.name = dataset.name + "/subset[" + mapping + "]";
  out.images = Tensor<float>::zeros({static_cast<int>(chosen.size()), 3, h, w});
  out.labels.resize(chosen.size());

  const std::size_t pixels = static_cast<std::size_t>(3) * h * w;
  for (std::size_t i = 0; i < chosen.size(); ++i) {
    const int src = chosen[i];
    std::copy(dataset.images.data() + src * pixels, dataset.images.data() + (src + 1) * pixels,
              out.images.data() + i * pixels);
    const int orig = dataset.labels[static_cast<std::size_t>(src)];
    const auto it = std::find(classes.begin(), classes.end(), orig);
    out.labels[i] = static_cast<int>(it - classes.begin());
  }
  return out;
}

std::vector<float> synth_template(int label, int num_classes, int image_hw) {
  std::vector<float> t(static_cast<std::size_t>(3) * image_hw * image_hw);
  // Distinct integer spatial frequencies per class (for any class count up
  // to image_hw^2) make the templates near-orthogonal over the pixel grid.
  (void)num_classes;
  for (int ch = 0; ch < 3; ++ch) {
    const int fx = 1 + label % image_hw;
    const int fy = 1 + (label / image_hw + 3 * ch) % image_hw;
    const double phase = 0.7 * label + 2.1 * ch;
    for (int y = 0; y < image_hw; ++y) {
      for (int x = 0; x < image_hw; ++x) {
        const double v =
            0.5 + 0.35 * std::sin(2.0 * 3.14159265358979323846 *
                                      (fx * x + fy * y) / static_cast<double>(image_hw) +
                                  phase);
        t[(static_cast<std::size_t>(ch) * image_hw + y) * image_hw + x] =
            static_cast<float>(v);
      }
    }
  }
  return t;
}

Dataset synth_dataset(int n_per_class, int num_classes, int image_hw, std::uint64_t seed,
                      double sigma) {
  if (num_classes < 2) fail(Error::Kind::argument, "synth_dataset: need at least 2 classes");
  if (n_per_class < 1) fail(Error::Kind::argument, "synth_dataset: n_per_class must be >= 1");

  const int n = n_per_class * num_classes;
  Dataset ds;
  ds.num_classes = num_classes;
  ds.name = "synthetic";
  ds.images = Tensor<float>::zeros({n, 3, image_hw, image_hw});
  ds.labels.resize(static_cast<std::size_t>(n));

  std::vector<std::vector<float>> templates(static_cast<std::size_t>(num_classes));
  for (int c = 0; c < num_classes; ++c)
    templates[static_cast<std::size_t>(c)] = synth_template(c, num_classes, image_hw);

  Rng rng(seed);
  const std::size_t pixels = static_cast<std::size_t>(3) * image_hw * image_hw;
  for (int i = 0; i < n; ++i) {
    const int label = i % num_classes;
    ds.labels[static_cast<std::size_t>(i)] = label;
    float* dst = ds.images.data() + static_cast<std::size_t>(i) * pixels;
    const std::vector<float>& t = templates[static_cast<std::size_t>(label)];
    for (std::size_t p = 0; p < pixels; ++p) {
      const double v = t[p] + sigma * rng.normal();
      dst[p] = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
  }
  return ds;
}

ChannelStats channel_stats(const Dataset& dataset) {
  const int n = dataset.size();
  const int h = dataset.images.dim(2), w = dataset.images.dim(3);
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  ChannelStats stats;
  for (int ch = 0; ch < 3; ++ch) {
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
      const float* src =
          dataset.images.data() + (static_cast<std::size_t>(i) * 3 + ch) * plane;
      for (std::size_t p = 0; p < plane; ++p) {
        sum += src[p];
        sq += static_cast<double>(src[p]) * src[p];
      }
    }
    const double count = static_cast<double>(n) * static_cast<double>(plane);
    const double mean = sum / count;
    const double var = std::max(sq / count - mean * mean, 1e-12);
    stats.mean[static_cast<std::size_t>(ch)] = static_cast<float>(mean);
    stats.stddev[static_cast<std::size_t>(ch)] = static_cast<float>(std::sqrt(var));
  }
  return stats;
}

void standardize(Dataset& dataset, const ChannelStats& stats) {
  const int n = dataset.size();
  const int h = dataset.images.dim(2), w = dataset.images.dim(3);
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  for (int i = 0; i < n; ++i) {
    for (int ch = 0; ch < 3; ++ch) {
      float* dst = dataset.images.data() + (static_cast<std::size_t>(i) * 3 + ch) * plane;
      const float mean = stats.mean[static_cast<std::size_t>(ch)];
      const float inv = 1.0f / stats.stddev[static_cast<std::size_t>(ch)];
      for (std::size_t p = 0; p < plane; ++p) dst[p] = (dst[p] - mean) * inv;
    }
  }
  dataset.name += "/standardized";
}

Tensor<float> gather_images(const Dataset& dataset, const int* indices, int count) {
  const int h = dataset.images.dim(2), w = dataset.images.dim(3);
  const std::size_t pixels = static_cast<std::size_t>(3) * h * w;
  Tensor<float> batch = Tensor<float>::zeros({count, 3, h, w});
  for (int i = 0; i < count; ++i) {
    const float* src = dataset.images.data() + static_cast<std::size_t>(indices[i]) * pixels;
    std::copy(src, src + pixels, batch.data() + static_cast<std::size_t>(i) * pixels);
  }
  return batch;
}

std::vector<int> gather_labels(const Dataset& dataset, const int* indices, int count) {
  std::vector<int> labels(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i)
    labels[static_cast<std::size_t>(i)] = dataset.labels[static_cast<std::size_t>(indices[i])];
  return labels;
}

}  // namespace pairfreeze
