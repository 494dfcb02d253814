#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "pairfreeze/model.hpp"

namespace pairfreeze {

// Deterministic builders: the same seed yields bit-identical parameters on
// every platform (He-uniform fan-in init from a per-parameter forked stream,
// zero biases, gamma=1, beta=0).

// The 12-layer sequential CNN: conv32,conv32,pool,drop.25,conv64,conv64,
// pool,drop.25,flatten,dense512,drop.5,dense(num_classes). ReLU is fused
// onto conv/dense layers. Requires H,W divisible by 4.
template <typename T>
Model<T> build_cnn12(std::array<int, 3> input_shape, int num_classes, std::uint64_t seed);

// VGG16 plan scaled to the input: five conv blocks (2,2,3,3,3 convs of
// 64/128/256/512/512 filters) each closed by a 2x2 max pool, then a small
// dense512 head. Requires H,W divisible by 32.
template <typename T>
Model<T> build_vgg_style(std::array<int, 3> input_shape, int num_classes, std::uint64_t seed);

// Four conv groups (two conv-bn-relu per group, filters 64/128/256/512)
// with a max pool after each group, global average pooling and a dense
// classifier. Requires H,W divisible by 16.
template <typename T>
Model<T> build_groupconv_net(std::array<int, 3> input_shape, int num_classes,
                             std::uint64_t seed);

// Dense blocks with 1x1 bottlenecks and channel concatenation; maxpool +
// 1x1 conv transitions halve spatial size and channels between blocks.
// Requires H,W divisible by 2^(blocks-1).
template <typename T>
Model<T> build_densenet_style(std::array<int, 3> input_shape, int num_classes,
                              std::uint64_t seed, int growth_rate = 12,
                              std::vector<int> block_sizes = {4, 4, 4});

// CLI architecture names: cnn12, vgg16, resnext, densenet.
const std::vector<std::string>& architecture_names();

template <typename T>
Model<T> build_by_name(const std::string& arch, std::array<int, 3> input_shape,
                       int num_classes, std::uint64_t seed);

}  // namespace pairfreeze
