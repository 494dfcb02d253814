#include "pairfreeze/kernels.hpp"

#include <algorithm>
#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace pairfreeze {

void set_thread_count(int threads) {
#ifdef _OPENMP
  omp_set_num_threads(threads < 1 ? 1 : threads);
#else
  (void)threads;
#endif
}

int thread_count() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

namespace kernels {

// Forward: each (n, o) output plane is owned by one thread. Per output
// element the contributions arrive in (c, i, j) order, matching the
// reference kernel, so the two agree bitwise. The x loop runs over a
// contiguous row segment and vectorizes as a fused multiply-add.
template <typename T>
void conv2d_forward(const T* in, const T* weight, const T* bias, T* out, const ConvShape& s) {
  const std::ptrdiff_t in_plane = static_cast<std::ptrdiff_t>(s.h) * s.w;
  const std::ptrdiff_t out_plane = static_cast<std::ptrdiff_t>(s.out_h) * s.out_w;
  const std::ptrdiff_t k_plane = static_cast<std::ptrdiff_t>(s.kh) * s.kw;

#pragma omp parallel for collapse(2) schedule(static)
  for (int n = 0; n < s.n; ++n) {
    for (int o = 0; o < s.cout; ++o) {
      T* __restrict dst = out + (static_cast<std::ptrdiff_t>(n) * s.cout + o) * out_plane;
      const T bo = bias ? bias[o] : T(0);
      for (std::ptrdiff_t p = 0; p < out_plane; ++p) dst[p] = bo;
      const T* in_n = in + static_cast<std::ptrdiff_t>(n) * s.cin * in_plane;
      const T* w_o = weight + static_cast<std::ptrdiff_t>(o) * s.cin * k_plane;
      for (int c = 0; c < s.cin; ++c) {
        const T* __restrict src = in_n + c * in_plane;
        const T* w_oc = w_o + c * k_plane;
        for (int i = 0; i < s.kh; ++i) {
          for (int j = 0; j < s.kw; ++j) {
            const T wv = w_oc[i * s.kw + j];
            for (int y = 0; y < s.out_h; ++y) {
              const int yi = y + i - s.pad_h;
              if (yi < 0 || yi >= s.h) continue;
              // valid output-x range for this kernel column
              const int x_lo = std::max(0, s.pad_w - j);
              const int x_hi = std::min(s.out_w, s.w + s.pad_w - j);
              T* __restrict drow = dst + static_cast<std::ptrdiff_t>(y) * s.out_w;
              const T* __restrict srow = src + static_cast<std::ptrdiff_t>(yi) * s.w + (j - s.pad_w);
#pragma omp simd
              for (int x = x_lo; x < x_hi; ++x) drow[x] += wv * srow[x];
            }
          }
        }
      }
    }
  }
}

// Input gradient: each (n, c) input plane is owned by one thread.
template <typename T>
void conv2d_backward_input(const T* gout, const T* weight, T* gin, const ConvShape& s) {
  const std::ptrdiff_t in_plane = static_cast<std::ptrdiff_t>(s.h) * s.w;
  const std::ptrdiff_t out_plane = static_cast<std::ptrdiff_t>(s.out_h) * s.out_w;
  const std::ptrdiff_t k_plane = static_cast<std::ptrdiff_t>(s.kh) * s.kw;

#pragma omp parallel for collapse(2) schedule(static)
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.cin; ++c) {
      T* __restrict dst = gin + (static_cast<std::ptrdiff_t>(n) * s.cin + c) * in_plane;
      const T* g_n = gout + static_cast<std::ptrdiff_t>(n) * s.cout * out_plane;
      for (int o = 0; o < s.cout; ++o) {
        const T* g = g_n + o * out_plane;
        const T* w_oc = weight + (static_cast<std::ptrdiff_t>(o) * s.cin + c) * k_plane;
        for (int i = 0; i < s.kh; ++i) {
          for (int j = 0; j < s.kw; ++j) {
            const T wv = w_oc[i * s.kw + j];
            // out[y, x] consumed in[y + i - pad, x + j - pad]
            for (int y = 0; y < s.out_h; ++y) {
              const int yi = y + i - s.pad_h;
              if (yi < 0 || yi >= s.h) continue;
              const int x_lo = std::max(0, s.pad_w - j);
              const int x_hi = std::min(s.out_w, s.w + s.pad_w - j);
              T* __restrict drow = dst + static_cast<std::ptrdiff_t>(yi) * s.w + (j - s.pad_w);
              const T* __restrict grow = g + static_cast<std::ptrdiff_t>(y) * s.out_w;
#pragma omp simd
              for (int x = x_lo; x < x_hi; ++x) drow[x] += wv * grow[x];
            }
          }
        }
      }
    }
  }
}

// Filter/bias gradient: each output channel o owns its weight slice and bias
// entry, so threads never write the same location.
template <typename T>
void conv2d_backward_filter(const T* gout, const T* in, T* gweight, T* gbias, const ConvShape& s) {
  const std::ptrdiff_t in_plane = static_cast<std::ptrdiff_t>(s.h) * s.w;
  const std::ptrdiff_t out_plane = static_cast<std::ptrdiff_t>(s.out_h) * s.out_w;
  const std::ptrdiff_t k_plane = static_cast<std::ptrdiff_t>(s.kh) * s.kw;

#pragma omp parallel for schedule(static)
  for (int o = 0; o < s.cout; ++o) {
    T* gw_o = gweight ? gweight + static_cast<std::ptrdiff_t>(o) * s.cin * k_plane : nullptr;
    T gb = T(0);
    for (int n = 0; n < s.n; ++n) {
      const T* g = gout + (static_cast<std::ptrdiff_t>(n) * s.cout + o) * out_plane;
      const T* in_n = in + static_cast<std::ptrdiff_t>(n) * s.cin * in_plane;
      if (gbias) {
        T acc = T(0);
#pragma omp simd reduction(+ : acc)
        for (std::ptrdiff_t p = 0; p < out_plane; ++p) acc += g[p];
        gb += acc;
      }
      if (!gw_o) continue;
      for (int c = 0; c < s.cin; ++c) {
        const T* src = in_n + c * in_plane;
        T* gw_oc = gw_o + c * k_plane;
        for (int i = 0; i < s.kh; ++i) {
          for (int j = 0; j < s.kw; ++j) {
            T acc = T(0);
            for (int y = 0; y < s.out_h; ++y) {
              const int yi = y + i - s.pad_h;
              if (yi < 0 || yi >= s.h) continue;
              const int x_lo = std::max(0, s.pad_w - j);
              const int x_hi = std::min(s.out_w, s.w + s.pad_w - j);
              const T* __restrict grow = g + static_cast<std::ptrdiff_t>(y) * s.out_w;
              const T* __restrict srow = src + static_cast<std::ptrdiff_t>(yi) * s.w + (j - s.pad_w);
              T racc = T(0);
#pragma omp simd reduction(+ : racc)
              for (int x = x_lo; x < x_hi; ++x) racc += grow[x] * srow[x];
              acc += racc;
            }
            gw_oc[i * s.kw + j] += acc;
          }
        }
      }
    }
    if (gbias) gbias[o] += gb;
  }
}

template <typename T>
void dense_forward(const T* x, const T* w, const T* b, T* out, int n, int d, int u) {
#pragma omp parallel for schedule(static)
  for (int row = 0; row < n; ++row) {
    T* __restrict dst = out + static_cast<std::ptrdiff_t>(row) * u;
    for (int k = 0; k < u; ++k) dst[k] = b ? b[k] : T(0);
    const T* xr = x + static_cast<std::ptrdiff_t>(row) * d;
    for (int k = 0; k < d; ++k) {
      const T xv = xr[k];
      const T* __restrict wrow = w + static_cast<std::ptrdiff_t>(k) * u;
#pragma omp simd
      for (int c = 0; c < u; ++c) dst[c] += xv * wrow[c];
    }
  }
}

template <typename T>
void dense_backward_input(const T* gout, const T* w, T* gx, int n, int d, int u) {
#pragma omp parallel for schedule(static)
  for (int row = 0; row < n; ++row) {
    const T* __restrict grow = gout + static_cast<std::ptrdiff_t>(row) * u;
    T* gxr = gx + static_cast<std::ptrdiff_t>(row) * d;
    for (int k = 0; k < d; ++k) {
      const T* __restrict wrow = w + static_cast<std::ptrdiff_t>(k) * u;
      T acc = T(0);
#pragma omp simd reduction(+ : acc)
      for (int c = 0; c < u; ++c) acc += grow[c] * wrow[c];
      gxr[k] += acc;
    }
  }
}

template <typename T>
void dense_backward_params(const T* gout, const T* x, T* gw, T* gb, int n, int d, int u) {
  if (!gw) {
    if (gb) {
      for (int row = 0; row < n; ++row) {
        const T* grow = gout + static_cast<std::ptrdiff_t>(row) * u;
        for (int c = 0; c < u; ++c) gb[c] += grow[c];
      }
    }
    return;
  }
#pragma omp parallel for schedule(static)
  for (int k = 0; k < d; ++k) {
    T* __restrict gwrow = gw + static_cast<std::ptrdiff_t>(k) * u;
    for (int row = 0; row < n; ++row) {
      const T xv = x[static_cast<std::ptrdiff_t>(row) * d + k];
      const T* __restrict grow = gout + static_cast<std::ptrdiff_t>(row) * u;
#pragma omp simd
      for (int c = 0; c < u; ++c) gwrow[c] += xv * grow[c];
    }
  }
  if (gb) {
    for (int row = 0; row < n; ++row) {
      const T* grow = gout + static_cast<std::ptrdiff_t>(row) * u;
      for (int c = 0; c < u; ++c) gb[c] += grow[c];
    }
  }
}

template <typename T>
void max_pool_forward(const T* in, T* out, int* argmax, int planes, int h, int w, int pool) {
  const int oh = h / pool;
  const int ow = w / pool;
#pragma omp parallel for schedule(static)
  for (int p = 0; p < planes; ++p) {
    const T* src = in + static_cast<std::ptrdiff_t>(p) * h * w;
    T* dst = out + static_cast<std::ptrdiff_t>(p) * oh * ow;
    int* arg = argmax + static_cast<std::ptrdiff_t>(p) * oh * ow;
    for (int y = 0; y < oh; ++y) {
      for (int x = 0; x < ow; ++x) {
        int best = (y * pool) * w + (x * pool);
        T best_v = src[best];
        for (int i = 0; i < pool; ++i) {
          for (int j = 0; j < pool; ++j) {
            const int idx = (y * pool + i) * w + (x * pool + j);
            if (src[idx] > best_v) {  // strict: first index wins ties
              best_v = src[idx];
              best = idx;
            }
          }
        }
        dst[y * ow + x] = best_v;
        arg[y * ow + x] = best;
      }
    }
  }
}

template <typename T>
void softmax_rows(const T* logits, T* probs, int rows, int cols) {
#pragma omp parallel for schedule(static)
  for (int r = 0; r < rows; ++r) {
    const T* in = logits + static_cast<std::ptrdiff_t>(r) * cols;
    T* out = probs + static_cast<std::ptrdiff_t>(r) * cols;
    T mx = in[0];
    for (int c = 1; c < cols; ++c) mx = std::max(mx, in[c]);
    T sum = T(0);
    for (int c = 0; c < cols; ++c) {
      out[c] = std::exp(in[c] - mx);
      sum += out[c];
    }
    const T inv = T(1) / sum;
    for (int c = 0; c < cols; ++c) out[c] *= inv;
  }
}

template void conv2d_forward<float>(const float*, const float*, const float*, float*, const ConvShape&);
template void conv2d_forward<double>(const double*, const double*, const double*, double*, const ConvShape&);
template void conv2d_backward_input<float>(const float*, const float*, float*, const ConvShape&);
template void conv2d_backward_input<double>(const double*, const double*, double*, const ConvShape&);
template void conv2d_backward_filter<float>(const float*, const float*, float*, float*, const ConvShape&);
template void conv2d_backward_filter<double>(const double*, const double*, double*, double*, const ConvShape&);
template void dense_forward<float>(const float*, const float*, const float*, float*, int, int, int);
template void dense_forward<double>(const double*, const double*, const double*, double*, int, int, int);
template void dense_backward_input<float>(const float*, const float*, float*, int, int, int);
template void dense_backward_input<double>(const double*, const double*, double*, int, int, int);
template void dense_backward_params<float>(const float*, const float*, float*, float*, int, int, int);
template void dense_backward_params<double>(const double*, const double*, double*, double*, int, int, int);
template void max_pool_forward<float>(const float*, float*, int*, int, int, int, int);
template void max_pool_forward<double>(const double*, double*, int*, int, int, int, int);
template void softmax_rows<float>(const float*, float*, int, int);
template void softmax_rows<double>(const double*, double*, int, int);

}  // namespace kernels

namespace reference {

template <typename T>
void conv2d_forward(const T* in, const T* weight, const T* bias, T* out, const ConvShape& s) {
  const std::ptrdiff_t in_plane = static_cast<std::ptrdiff_t>(s.h) * s.w;
  const std::ptrdiff_t out_plane = static_cast<std::ptrdiff_t>(s.out_h) * s.out_w;
  const std::ptrdiff_t k_plane = static_cast<std::ptrdiff_t>(s.kh) * s.kw;
  for (int n = 0; n < s.n; ++n) {
    for (int o = 0; o < s.cout; ++o) {
      for (int y = 0; y < s.out_h; ++y) {
        for (int x = 0; x < s.out_w; ++x) {
          T acc = bias ? bias[o] : T(0);
          for (int c = 0; c < s.cin; ++c) {
            for (int i = 0; i < s.kh; ++i) {
              for (int j = 0; j < s.kw; ++j) {
                const int yi = y + i - s.pad_h;
                const int xi = x + j - s.pad_w;
                if (yi < 0 || yi >= s.h || xi < 0 || xi >= s.w) continue;
                acc += weight[(static_cast<std::ptrdiff_t>(o) * s.cin + c) * k_plane + i * s.kw + j] *
                       in[(static_cast<std::ptrdiff_t>(n) * s.cin + c) * in_plane + yi * s.w + xi];
              }
            }
          }
          out[(static_cast<std::ptrdiff_t>(n) * s.cout + o) * out_plane + y * s.out_w + x] = acc;
        }
      }
    }
  }
}

template <typename T>
void conv2d_backward_input(const T* gout, const T* weight, T* gin, const ConvShape& s) {
  const std::ptrdiff_t in_plane = static_cast<std::ptrdiff_t>(s.h) * s.w;
  const std::ptrdiff_t out_plane = static_cast<std::ptrdiff_t>(s.out_h) * s.out_w;
  const std::ptrdiff_t k_plane = static_cast<std::ptrdiff_t>(s.kh) * s.kw;
  for (int n = 0; n < s.n; ++n) {
    for (int o = 0; o < s.cout; ++o) {
      for (int y = 0; y < s.out_h; ++y) {
        for (int x = 0; x < s.out_w; ++x) {
          const T g = gout[(static_cast<std::ptrdiff_t>(n) * s.cout + o) * out_plane + y * s.out_w + x];
          for (int c = 0; c < s.cin; ++c) {
            for (int i = 0; i < s.kh; ++i) {
              for (int j = 0; j < s.kw; ++j) {
                const int yi = y + i - s.pad_h;
                const int xi = x + j - s.pad_w;
                if (yi < 0 || yi >= s.h || xi < 0 || xi >= s.w) continue;
                gin[(static_cast<std::ptrdiff_t>(n) * s.cin + c) * in_plane + yi * s.w + xi] +=
                    weight[(static_cast<std::ptrdiff_t>(o) * s.cin + c) * k_plane + i * s.kw + j] * g;
              }
            }
          }
        }
      }
    }
  }
}

template <typename T>
void conv2d_backward_filter(const T* gout, const T* in, T* gweight, T* gbias, const ConvShape& s) {
  const std::ptrdiff_t in_plane = static_cast<std::ptrdiff_t>(s.h) * s.w;
  const std::ptrdiff_t out_plane = static_cast<std::ptrdiff_t>(s.out_h) * s.out_w;
  const std::ptrdiff_t k_plane = static_cast<std::ptrdiff_t>(s.kh) * s.kw;
  for (int n = 0; n < s.n; ++n) {
    for (int o = 0; o < s.cout; ++o) {
      for (int y = 0; y < s.out_h; ++y) {
        for (int x = 0; x < s.out_w; ++x) {
          const T g = gout[(static_cast<std::ptrdiff_t>(n) * s.cout + o) * out_plane + y * s.out_w + x];
          if (gbias) gbias[o] += g;
          if (!gweight) continue;
          for (int c = 0; c < s.cin; ++c) {
            for (int i = 0; i < s.kh; ++i) {
              for (int j = 0; j < s.kw; ++j) {
                const int yi = y + i - s.pad_h;
                const int xi = x + j - s.pad_w;
                if (yi < 0 || yi >= s.h || xi < 0 || xi >= s.w) continue;
                gweight[(static_cast<std::ptrdiff_t>(o) * s.cin + c) * k_plane + i * s.kw + j] +=
                    g * in[(static_cast<std::ptrdiff_t>(n) * s.cin + c) * in_plane + yi * s.w + xi];
              }
            }
          }
        }
      }
    }
  }
}

template <typename T>
void dense_forward(const T* x, const T* w, const T* b, T* out, int n, int d, int u) {
  for (int row = 0; row < n; ++row) {
    for (int c = 0; c < u; ++c) {
      T acc = b ? b[c] : T(0);
      for (int k = 0; k < d; ++k)
        acc += x[static_cast<std::ptrdiff_t>(row) * d + k] * w[static_cast<std::ptrdiff_t>(k) * u + c];
      out[static_cast<std::ptrdiff_t>(row) * u + c] = acc;
    }
  }
}

template <typename T>
void dense_backward_input(const T* gout, const T* w, T* gx, int n, int d, int u) {
  for (int row = 0; row < n; ++row) {
    for (int k = 0; k < d; ++k) {
      T acc = T(0);
      for (int c = 0; c < u; ++c)
        acc += gout[static_cast<std::ptrdiff_t>(row) * u + c] * w[static_cast<std::ptrdiff_t>(k) * u + c];
      gx[static_cast<std::ptrdiff_t>(row) * d + k] += acc;
    }
  }
}

template <typename T>
void dense_backward_params(const T* gout, const T* x, T* gw, T* gb, int n, int d, int u) {
  for (int row = 0; row < n; ++row) {
    if (gw) {
      for (int k = 0; k < d; ++k) {
        for (int c = 0; c < u; ++c) {
          gw[static_cast<std::ptrdiff_t>(k) * u + c] +=
              x[static_cast<std::ptrdiff_t>(row) * d + k] * gout[static_cast<std::ptrdiff_t>(row) * u + c];
        }
      }
    }
    if (gb) {
      for (int c = 0; c < u; ++c) gb[c] += gout[static_cast<std::ptrdiff_t>(row) * u + c];
    }
  }
}

template <typename T>
void max_pool_forward(const T* in, T* out, int* argmax, int planes, int h, int w, int pool) {
  const int oh = h / pool;
  const int ow = w / pool;
  for (int p = 0; p < planes; ++p) {
    const T* src = in + static_cast<std::ptrdiff_t>(p) * h * w;
    T* dst = out + static_cast<std::ptrdiff_t>(p) * oh * ow;
    int* arg = argmax + static_cast<std::ptrdiff_t>(p) * oh * ow;
    for (int y = 0; y < oh; ++y) {
      for (int x = 0; x < ow; ++x) {
        int best = (y * pool) * w + (x * pool);
        T best_v = src[best];
        for (int i = 0; i < pool; ++i) {
          for (int j = 0; j < pool; ++j) {
            const int idx = (y * pool + i) * w + (x * pool + j);
            if (src[idx] > best_v) {
              best_v = src[idx];
              best = idx;
            }
          }
        }
        dst[y * ow + x] = best_v;
        arg[y * ow + x] = best;
      }
    }
  }
}

template void conv2d_forward<float>(const float*, const float*, const float*, float*, const ConvShape&);
template void conv2d_forward<double>(const double*, const double*, const double*, double*, const ConvShape&);
template void conv2d_backward_input<float>(const float*, const float*, float*, const ConvShape&);
template void conv2d_backward_input<double>(const double*, const double*, double*, const ConvShape&);
template void conv2d_backward_filter<float>(const float*, const float*, float*, float*, const ConvShape&);
template void conv2d_backward_filter<double>(const double*, const double*, double*, double*, const ConvShape&);
template void dense_forward<float>(const float*, const float*, const float*, float*, int, int, int);
template void dense_forward<double>(const double*, const double*, const double*, double*, int, int, int);
template void dense_backward_input<float>(const float*, const float*, float*, int, int, int);
template void dense_backward_input<double>(const double*, const double*, double*, int, int, int);
template void dense_backward_params<float>(const float*, const float*, float*, float*, int, int, int);
template void dense_backward_params<double>(const double*, const double*, double*, double*, int, int, int);
template void max_pool_forward<float>(const float*, float*, int*, int, int, int, int);
template void max_pool_forward<double>(const double*, double*, int*, int, int, int, int);

}  // namespace reference
}  // namespace pairfreeze
