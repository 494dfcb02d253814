#pragma once

#include <cstddef>

namespace pairfreeze {

// Geometry of one stride-1 2D convolution. pad_* is the zero padding applied
// on each side ('same' => (k-1)/2, 'valid' => 0).
struct ConvShape {
  int n = 0;
  int cin = 0;
  int h = 0;
  int w = 0;
  int cout = 0;
  int kh = 0;
  int kw = 0;
  int pad_h = 0;
  int pad_w = 0;
  int out_h = 0;
  int out_w = 0;
};

// OpenMP kernels. Work is split over disjoint output regions with a fixed
// per-element accumulation order, so results are bit-identical for every
// thread count. Backward kernels accumulate (+=) into their grad outputs.
namespace kernels {

template <typename T>
void conv2d_forward(const T* in, const T* weight, const T* bias, T* out, const ConvShape& s);
template <typename T>
void conv2d_backward_input(const T* gout, const T* weight, T* gin, const ConvShape& s);
template <typename T>
void conv2d_backward_filter(const T* gout, const T* in, T* gweight, T* gbias, const ConvShape& s);

// dense: x[n,d] * w[d,u] + b[u]
template <typename T>
void dense_forward(const T* x, const T* w, const T* b, T* out, int n, int d, int u);
template <typename T>
void dense_backward_input(const T* gout, const T* w, T* gx, int n, int d, int u);
template <typename T>
void dense_backward_params(const T* gout, const T* x, T* gw, T* gb, int n, int d, int u);

template <typename T>
void max_pool_forward(const T* in, T* out, int* argmax, int planes, int h, int w, int pool);

// Row-wise softmax with max subtraction, out may alias nothing.
template <typename T>
void softmax_rows(const T* logits, T* probs, int rows, int cols);

}  // namespace kernels

// Plain serial loops, written as the textbook definition of each operation.
// These are the reference the parallel kernels are tested against and the
// baseline for the kernel benchmark; they take no shortcuts.
namespace reference {

template <typename T>
void conv2d_forward(const T* in, const T* weight, const T* bias, T* out, const ConvShape& s);
template <typename T>
void conv2d_backward_input(const T* gout, const T* weight, T* gin, const ConvShape& s);
template <typename T>
void conv2d_backward_filter(const T* gout, const T* in, T* gweight, T* gbias, const ConvShape& s);

template <typename T>
void dense_forward(const T* x, const T* w, const T* b, T* out, int n, int d, int u);
template <typename T>
void dense_backward_input(const T* gout, const T* w, T* gx, int n, int d, int u);
template <typename T>
void dense_backward_params(const T* gout, const T* x, T* gw, T* gb, int n, int d, int u);

template <typename T>
void max_pool_forward(const T* in, T* out, int* argmax, int planes, int h, int w, int pool);

}  // namespace reference

// Op-level parallelism (thread count for the OpenMP kernels).
void set_thread_count(int threads);
int thread_count();

}  // namespace pairfreeze
