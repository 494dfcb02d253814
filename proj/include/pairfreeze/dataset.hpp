#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "pairfreeze/tensor.hpp"

namespace pairfreeze {

// Labeled image set. Pixel values are in [0,1] straight from parsing;
// standardize() recenters them with training-split channel statistics.
struct Dataset {
  Tensor<float> images;  // [N, 3, H, W]
  std::vector<int> labels;
  int num_classes = 0;
  std::string name;

  int size() const { return static_cast<int>(labels.size()); }
};

enum class CifarVariant { cifar10, cifar100 };

constexpr int kCifarPixelBytes = 3072;  // 3 channels x 32 x 32, channel-major

// Parse concatenated CIFAR binary records. cifar10 records are
// [label][3072 pixels]; cifar100 records are [coarse][fine][3072 pixels]
// and the fine label is kept. Pixels are channel-major, row-major inside a
// channel, scaled to [0,1].
Dataset parse_cifar_records(const std::vector<unsigned char>& bytes, CifarVariant variant);

// Append one record in the on-disk layout (test/tooling helper; `coarse` is
// ignored for cifar10).
void append_cifar_record(std::vector<unsigned char>& out, CifarVariant variant, int label,
                         const unsigned char* pixels, int coarse = 0);

// Load the conventional files from a directory: train.bin/test.bin for
// cifar100, data_batch_1..5.bin/test_batch.bin for cifar10.
Dataset load_cifar_dir(const std::string& data_dir, CifarVariant variant, bool train);

// Seeded sampling without replacement of `per_class` images from each of the
// requested classes; labels are re-indexed densely in argument order.
Dataset subset(const Dataset& dataset, const std::vector<int>& classes, int per_class,
               std::uint64_t seed);

// Synthetic classification fixture: class c is a fixed sinusoidal template
// plus Gaussian noise, clipped to [0,1]. At the default sigma the classes
// are linearly separable, so any sane training run should learn them.
// Sample i has label i % num_classes.
Dataset synth_dataset(int n_per_class, int num_classes, int image_hw, std::uint64_t seed,
                      double sigma = 0.1);

// The noiseless template behind synth_dataset, for nearest-template checks.
std::vector<float> synth_template(int label, int num_classes, int image_hw);

struct ChannelStats {
  std::array<float, 3> mean{};
  std::array<float, 3> stddev{};
};

ChannelStats channel_stats(const Dataset& dataset);
void standardize(Dataset& dataset, const ChannelStats& stats);

// Batch assembly for the training loop.
Tensor<float> gather_images(const Dataset& dataset, const int* indices, int count);
std::vector<int> gather_labels(const Dataset& dataset, const int* indices, int count);

}  // namespace pairfreeze
