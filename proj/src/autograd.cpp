#include "pairfreeze/autograd.hpp"

#include <cmath>
#include <cstdlib>
#include <memory>

#include "pairfreeze/kernels.hpp"

namespace pairfreeze {

bool finite_checks_enabled() {
  static const bool enabled = [] {
    const char* v = std::getenv("PAIRFREEZE_CHECK_FINITE");
    return v != nullptr && v[0] != '\0' && !(v[0] == '0' && v[1] == '\0');
  }();
  return enabled;
}

namespace {

template <typename T>
void check_finite(const Tensor<T>& t, const char* op) {
  if (!finite_checks_enabled()) return;
  const T* p = t.data();
  const std::size_t n = t.numel();
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(static_cast<double>(p[i])))
      fail(Error::Kind::state, op, ": non-finite output at flat index ", i);
  }
}

template <typename T>
void expect_ndim(const Tensor<T>& t, int ndim, const char* op, const char* role) {
  if (t.ndim() != ndim)
    fail(Error::Kind::shape, op, ": ", role, " must have ", ndim, " dims, got shape ",
         shape_string(t.shape()));
}

}  // namespace

template <typename T>
void Tape<T>::backward(const Tensor<T>& loss) {
  if (!loss.defined() || loss.numel() != 1)
    fail(Error::Kind::shape, "backward: loss must be a scalar");
  TensorImpl<T>* impl = loss.impl();
  if (impl->tape_id != id_ || impl->node < 0)
    fail(Error::Kind::state, "backward: loss was not produced on this tape");

  const int start = impl->node;
  nodes_[static_cast<std::size_t>(start)].out.ensure_grad();
  nodes_[static_cast<std::size_t>(start)].out.grad()[0] = T(1);

  for (int i = start; i >= 0; --i) {
    TapeNode<T>& node = nodes_[static_cast<std::size_t>(i)];
    if (node.backward && node.needs_grad && node.out.has_grad()) node.backward(*this);
    // Retire: free saved forward state and this node's transient gradient.
    node.backward = nullptr;
    if (node.out.defined() && !node.out.is_leaf()) {
      node.out.drop_grad();
      node.out.reset();
    }
  }
}

template class Tape<float>;
template class Tape<double>;

// ---------------------------------------------------------------------------
// conv2d

template <typename T>
Tensor<T> conv2d(Tape<T>* tape, const Tensor<T>& input, const Tensor<T>& weight,
                 const Tensor<T>& bias, Padding padding) {
  expect_ndim(input, 4, "conv2d", "input");
  expect_ndim(weight, 4, "conv2d", "weight");
  expect_ndim(bias, 1, "conv2d", "bias");

  ConvShape s;
  s.n = input.dim(0);
  s.cin = input.dim(1);
  s.h = input.dim(2);
  s.w = input.dim(3);
  s.cout = weight.dim(0);
  s.kh = weight.dim(2);
  s.kw = weight.dim(3);

  if (weight.dim(1) != s.cin)
    fail(Error::Kind::shape, "conv2d: input channels (", s.cin,
         ") do not match weight input channels (", weight.dim(1), ")");
  if (bias.dim(0) != s.cout)
    fail(Error::Kind::shape, "conv2d: bias length (", bias.dim(0),
         ") does not match filter count (", s.cout, ")");

  if (padding == Padding::same) {
    if (s.kh % 2 == 0 || s.kw % 2 == 0)
      fail(Error::Kind::argument, "conv2d: 'same' padding requires odd kernel, got ", s.kh,
           "x", s.kw);
    s.pad_h = (s.kh - 1) / 2;
    s.pad_w = (s.kw - 1) / 2;
    s.out_h = s.h;
    s.out_w = s.w;
  } else {
    s.pad_h = 0;
    s.pad_w = 0;
    s.out_h = s.h - s.kh + 1;
    s.out_w = s.w - s.kw + 1;
    if (s.out_h < 1 || s.out_w < 1)
      fail(Error::Kind::shape, "conv2d: kernel ", s.kh, "x", s.kw,
           " larger than input ", s.h, "x", s.w, " with 'valid' padding");
  }

  Tensor<T> out = Tensor<T>::zeros({s.n, s.cout, s.out_h, s.out_w});
  kernels::conv2d_forward(input.data(), weight.data(), bias.data(), out.data(), s);
  check_finite(out, "conv2d");

  if (tape) {
    const int pi = tape->track(input);
    const int pw = tape->track(weight);
    const int pb = tape->track(bias);
    Tensor<T> saved_in = input;
    Tensor<T> saved_w = weight;
    Tensor<T> out_ref = out;
    tape->emplace(out, {pi, pw, pb}, [=](Tape<T>& tp) {
      const T* g = out_ref.grad();
      if (T* gin = tp.grad_sink(pi))
        kernels::conv2d_backward_input(g, saved_w.data(), gin, s);
      T* gw = tp.grad_sink(pw);
      T* gb = tp.grad_sink(pb);
      if (gw || gb) kernels::conv2d_backward_filter(g, saved_in.data(), gw, gb, s);
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// max_pool2d

template <typename T>
Tensor<T> max_pool2d(Tape<T>* tape, const Tensor<T>& input, int pool) {
  expect_ndim(input, 4, "max_pool2d", "input");
  if (pool < 1) fail(Error::Kind::argument, "max_pool2d: pool size must be >= 1, got ", pool);
  const int n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  if (h % pool != 0 || w % pool != 0)
    fail(Error::Kind::shape, "max_pool2d: spatial dims ", h, "x", w,
         " not divisible by pool size ", pool);

  const int planes = n * c;
  const int oh = h / pool, ow = w / pool;
  Tensor<T> out = Tensor<T>::zeros({n, c, oh, ow});
  auto argmax = std::make_shared<Storage<int>>(static_cast<std::size_t>(planes) * oh * ow);
  kernels::max_pool_forward(input.data(), out.data(), argmax->data(), planes, h, w, pool);
  check_finite(out, "max_pool2d");

  if (tape) {
    const int pi = tape->track(input);
    Tensor<T> out_ref = out;
    const std::ptrdiff_t in_plane = static_cast<std::ptrdiff_t>(h) * w;
    const std::ptrdiff_t out_plane = static_cast<std::ptrdiff_t>(oh) * ow;
    tape->emplace(out, {pi}, [=](Tape<T>& tp) {
      T* gin = tp.grad_sink(pi);
      if (!gin) return;
      const T* g = out_ref.grad();
      const int* arg = argmax->data();
      for (int p = 0; p < planes; ++p) {
        for (std::ptrdiff_t q = 0; q < out_plane; ++q)
          gin[p * in_plane + arg[p * out_plane + q]] += g[p * out_plane + q];
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// relu

template <typename T>
Tensor<T> relu(Tape<T>* tape, const Tensor<T>& input) {
  Tensor<T> out = Tensor<T>::zeros(input.shape());
  const T* x = input.data();
  T* y = out.data();
  const std::size_t n = input.numel();
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > T(0) ? x[i] : T(0);

  if (tape) {
    const int pi = tape->track(input);
    Tensor<T> saved_in = input;
    Tensor<T> out_ref = out;
    tape->emplace(out, {pi}, [=](Tape<T>& tp) {
      T* gin = tp.grad_sink(pi);
      if (!gin) return;
      const T* g = out_ref.grad();
      const T* xs = saved_in.data();
      for (std::size_t i = 0; i < n; ++i)
        if (xs[i] > T(0)) gin[i] += g[i];
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// dense

template <typename T>
Tensor<T> dense(Tape<T>* tape, const Tensor<T>& input, const Tensor<T>& weight,
                const Tensor<T>& bias) {
  expect_ndim(input, 2, "dense", "input");
  expect_ndim(weight, 2, "dense", "weight");
  expect_ndim(bias, 1, "dense", "bias");
  const int n = input.dim(0), d = input.dim(1), u = weight.dim(1);
  if (weight.dim(0) != d)
    fail(Error::Kind::shape, "dense: input width (", d, ") does not match weight rows (",
         weight.dim(0), ")");
  if (bias.dim(0) != u)
    fail(Error::Kind::shape, "dense: bias length (", bias.dim(0), ") does not match units (",
         u, ")");

  Tensor<T> out = Tensor<T>::zeros({n, u});
  kernels::dense_forward(input.data(), weight.data(), bias.data(), out.data(), n, d, u);
  check_finite(out, "dense");

  if (tape) {
    const int pi = tape->track(input);
    const int pw = tape->track(weight);
    const int pb = tape->track(bias);
    Tensor<T> saved_in = input;
    Tensor<T> saved_w = weight;
    Tensor<T> out_ref = out;
    tape->emplace(out, {pi, pw, pb}, [=](Tape<T>& tp) {
      const T* g = out_ref.grad();
      if (T* gin = tp.grad_sink(pi))
        kernels::dense_backward_input(g, saved_w.data(), gin, n, d, u);
      T* gw = tp.grad_sink(pw);
      T* gb = tp.grad_sink(pb);
      if (gw || gb) kernels::dense_backward_params(g, saved_in.data(), gw, gb, n, d, u);
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// dropout (inverted: survivors scaled by 1/(1-rate), eval is the identity)

template <typename T>
Tensor<T> dropout(Tape<T>* tape, const Tensor<T>& input, double rate, Mode mode, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0)
    fail(Error::Kind::argument, "dropout: rate must be in [0,1), got ", rate);
  if (mode == Mode::eval) return input;

  const std::size_t n = input.numel();
  auto mask = std::make_shared<Storage<T>>(n);
  const T scale = static_cast<T>(1.0 / (1.0 - rate));
  T* m = mask->data();
  for (std::size_t i = 0; i < n; ++i) m[i] = rng.next_double() < rate ? T(0) : scale;

  Tensor<T> out = Tensor<T>::zeros(input.shape());
  const T* x = input.data();
  T* y = out.data();
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i] * m[i];

  if (tape) {
    const int pi = tape->track(input);
    Tensor<T> out_ref = out;
    tape->emplace(out, {pi}, [=](Tape<T>& tp) {
      T* gin = tp.grad_sink(pi);
      if (!gin) return;
      const T* g = out_ref.grad();
      const T* ms = mask->data();
      for (std::size_t i = 0; i < n; ++i) gin[i] += g[i] * ms[i];
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// flatten

template <typename T>
Tensor<T> flatten(Tape<T>* tape, const Tensor<T>& input) {
  const int n = input.dim(0);
  const int d = static_cast<int>(input.numel() / static_cast<std::size_t>(n));
  Tensor<T> out = input.reshaped({n, d});  // shares the data buffer

  if (tape) {
    const int pi = tape->track(input);
    Tensor<T> out_ref = out;
    const std::size_t count = input.numel();
    tape->emplace(out, {pi}, [=](Tape<T>& tp) {
      T* gin = tp.grad_sink(pi);
      if (!gin) return;
      const T* g = out_ref.grad();
      for (std::size_t i = 0; i < count; ++i) gin[i] += g[i];
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// batch_norm2d

template <typename T>
Tensor<T> batch_norm2d(Tape<T>* tape, const Tensor<T>& input, const Tensor<T>& gamma,
                       const Tensor<T>& beta, Tensor<T>& running_mean, Tensor<T>& running_var,
                       Mode mode, double momentum, double epsilon) {
  expect_ndim(input, 4, "batch_norm2d", "input");
  const int n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  if (gamma.dim(0) != c || beta.dim(0) != c)
    fail(Error::Kind::shape, "batch_norm2d: gamma/beta length must equal channels (", c, ")");
  const std::ptrdiff_t plane = static_cast<std::ptrdiff_t>(h) * w;
  const std::ptrdiff_t m = static_cast<std::ptrdiff_t>(n) * plane;  // elements per channel
  const bool train = mode == Mode::train;
  if (train && m < 2)
    fail(Error::Kind::state, "batch_norm2d: train mode needs at least 2 values per channel, got ",
         m);

  Tensor<T> out = Tensor<T>::zeros(input.shape());
  auto xhat = std::make_shared<Storage<T>>(input.numel());
  auto invstd = std::make_shared<Storage<T>>(static_cast<std::size_t>(c));

  const T* x = input.data();
  T* y = out.data();
  T* xh = xhat->data();
  T* is = invstd->data();
  const T* gm = gamma.data();
  const T* bt = beta.data();

#pragma omp parallel for schedule(static)
  for (int ch = 0; ch < c; ++ch) {
    T mean, var;
    if (train) {
      T sum = T(0);
      for (int b = 0; b < n; ++b) {
        const T* src = x + (static_cast<std::ptrdiff_t>(b) * c + ch) * plane;
        T acc = T(0);
#pragma omp simd reduction(+ : acc)
        for (std::ptrdiff_t p = 0; p < plane; ++p) acc += src[p];
        sum += acc;
      }
      mean = sum / static_cast<T>(m);
      T sq = T(0);
      for (int b = 0; b < n; ++b) {
        const T* src = x + (static_cast<std::ptrdiff_t>(b) * c + ch) * plane;
        T acc = T(0);
#pragma omp simd reduction(+ : acc)
        for (std::ptrdiff_t p = 0; p < plane; ++p) acc += (src[p] - mean) * (src[p] - mean);
        sq += acc;
      }
      var = sq / static_cast<T>(m);  // biased, as used for normalization
      running_mean.data()[ch] =
          static_cast<T>((1.0 - momentum) * running_mean.data()[ch] + momentum * mean);
      running_var.data()[ch] =
          static_cast<T>((1.0 - momentum) * running_var.data()[ch] + momentum * var);
    } else {
      mean = running_mean.data()[ch];
      var = running_var.data()[ch];
    }
    const T istd = static_cast<T>(1.0 / std::sqrt(static_cast<double>(var) + epsilon));
    is[ch] = istd;
    for (int b = 0; b < n; ++b) {
      const std::ptrdiff_t base = (static_cast<std::ptrdiff_t>(b) * c + ch) * plane;
      const T* __restrict src = x + base;
      T* __restrict xhr = xh + base;
      T* __restrict dst = y + base;
#pragma omp simd
      for (std::ptrdiff_t p = 0; p < plane; ++p) {
        xhr[p] = (src[p] - mean) * istd;
        dst[p] = gm[ch] * xhr[p] + bt[ch];
      }
    }
  }
  check_finite(out, "batch_norm2d");

  if (tape) {
    const int pi = tape->track(input);
    const int pg = tape->track(gamma);
    const int pb = tape->track(beta);
    Tensor<T> saved_gamma = gamma;
    Tensor<T> out_ref = out;
    tape->emplace(out, {pi, pg, pb}, [=](Tape<T>& tp) {
      const T* g = out_ref.grad();
      T* gin = tp.grad_sink(pi);
      T* ggamma = tp.grad_sink(pg);
      T* gbeta = tp.grad_sink(pb);
      const T* xhs = xhat->data();
      const T* istd = invstd->data();
      const T* gms = saved_gamma.data();
#pragma omp parallel for schedule(static)
      for (int ch = 0; ch < c; ++ch) {
        T s1 = T(0), s2 = T(0);
        for (int b = 0; b < n; ++b) {
          const std::ptrdiff_t base = (static_cast<std::ptrdiff_t>(b) * c + ch) * plane;
          T a1 = T(0), a2 = T(0);
#pragma omp simd reduction(+ : a1, a2)
          for (std::ptrdiff_t p = 0; p < plane; ++p) {
            a1 += g[base + p];
            a2 += g[base + p] * xhs[base + p];
          }
          s1 += a1;
          s2 += a2;
        }
        if (gbeta) gbeta[ch] += s1;
        if (ggamma) ggamma[ch] += s2;
        if (gin) {
          const T k = gms[ch] * istd[ch];
          if (train) {
            const T mean_g = s1 / static_cast<T>(m);
            const T mean_gx = s2 / static_cast<T>(m);
            for (int b = 0; b < n; ++b) {
              const std::ptrdiff_t base = (static_cast<std::ptrdiff_t>(b) * c + ch) * plane;
#pragma omp simd
              for (std::ptrdiff_t p = 0; p < plane; ++p)
                gin[base + p] += k * (g[base + p] - mean_g - xhs[base + p] * mean_gx);
            }
          } else {
            for (int b = 0; b < n; ++b) {
              const std::ptrdiff_t base = (static_cast<std::ptrdiff_t>(b) * c + ch) * plane;
#pragma omp simd
              for (std::ptrdiff_t p = 0; p < plane; ++p) gin[base + p] += k * g[base + p];
            }
          }
        }
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// global_avg_pool

template <typename T>
Tensor<T> global_avg_pool(Tape<T>* tape, const Tensor<T>& input) {
  expect_ndim(input, 4, "global_avg_pool", "input");
  const int n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  const std::ptrdiff_t plane = static_cast<std::ptrdiff_t>(h) * w;
  Tensor<T> out = Tensor<T>::zeros({n, c});
  const T* x = input.data();
  T* y = out.data();
  const T inv = static_cast<T>(1.0 / static_cast<double>(plane));
  for (int b = 0; b < n; ++b) {
    for (int ch = 0; ch < c; ++ch) {
      const T* src = x + (static_cast<std::ptrdiff_t>(b) * c + ch) * plane;
      T acc = T(0);
      for (std::ptrdiff_t p = 0; p < plane; ++p) acc += src[p];
      y[b * c + ch] = acc * inv;
    }
  }
  check_finite(out, "global_avg_pool");

  if (tape) {
    const int pi = tape->track(input);
    Tensor<T> out_ref = out;
    tape->emplace(out, {pi}, [=](Tape<T>& tp) {
      T* gin = tp.grad_sink(pi);
      if (!gin) return;
      const T* g = out_ref.grad();
      for (int b = 0; b < n; ++b) {
        for (int ch = 0; ch < c; ++ch) {
          const T gv = g[b * c + ch] * inv;
          T* dst = gin + (static_cast<std::ptrdiff_t>(b) * c + ch) * plane;
          for (std::ptrdiff_t p = 0; p < plane; ++p) dst[p] += gv;
        }
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// concat_channels

template <typename T>
Tensor<T> concat_channels(Tape<T>* tape, const std::vector<Tensor<T>>& inputs) {
  if (inputs.empty()) fail(Error::Kind::argument, "concat_channels: no inputs");
  expect_ndim(inputs[0], 4, "concat_channels", "input");
  const int n = inputs[0].dim(0), h = inputs[0].dim(2), w = inputs[0].dim(3);
  int total_c = 0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    expect_ndim(inputs[i], 4, "concat_channels", "input");
    if (inputs[i].dim(0) != n || inputs[i].dim(2) != h || inputs[i].dim(3) != w)
      fail(Error::Kind::shape, "concat_channels: input ", i, " has shape ",
           shape_string(inputs[i].shape()), ", expected (", n, ",*,", h, ",", w, ")");
    total_c += inputs[i].dim(1);
  }

  const std::ptrdiff_t plane = static_cast<std::ptrdiff_t>(h) * w;
  Tensor<T> out = Tensor<T>::zeros({n, total_c, h, w});
  T* y = out.data();
  std::vector<int> offsets(inputs.size());
  int off = 0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    offsets[i] = off;
    const int ci = inputs[i].dim(1);
    const T* x = inputs[i].data();
    for (int b = 0; b < n; ++b) {
      std::copy(x + static_cast<std::ptrdiff_t>(b) * ci * plane,
                x + static_cast<std::ptrdiff_t>(b + 1) * ci * plane,
                y + (static_cast<std::ptrdiff_t>(b) * total_c + off) * plane);
    }
    off += ci;
  }

  if (tape) {
    std::vector<int> parents(inputs.size());
    std::vector<int> widths(inputs.size());
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      parents[i] = tape->track(inputs[i]);
      widths[i] = inputs[i].dim(1);
    }
    Tensor<T> out_ref = out;
    tape->emplace(out, parents, [=](Tape<T>& tp) {
      const T* g = out_ref.grad();
      for (std::size_t i = 0; i < parents.size(); ++i) {
        T* gin = tp.grad_sink(parents[i]);
        if (!gin) continue;
        const int ci = widths[i];
        for (int b = 0; b < n; ++b) {
          const T* src = g + (static_cast<std::ptrdiff_t>(b) * total_c + offsets[i]) * plane;
          T* dst = gin + static_cast<std::ptrdiff_t>(b) * ci * plane;
          for (std::ptrdiff_t p = 0; p < static_cast<std::ptrdiff_t>(ci) * plane; ++p)
            dst[p] += src[p];
        }
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// softmax_cross_entropy (fused: stable log-sum-exp loss, softmax probs out)

template <typename T>
LossResult<T> softmax_cross_entropy(Tape<T>* tape, const Tensor<T>& logits,
                                    const std::vector<int>& labels) {
  expect_ndim(logits, 2, "softmax_cross_entropy", "logits");
  const int n = logits.dim(0), k = logits.dim(1);
  if (static_cast<int>(labels.size()) != n)
    fail(Error::Kind::shape, "softmax_cross_entropy: ", labels.size(), " labels for ", n,
         " rows");
  for (int r = 0; r < n; ++r) {
    if (labels[r] < 0 || labels[r] >= k)
      fail(Error::Kind::argument, "softmax_cross_entropy: label ", labels[r], " at row ", r,
           " outside [0,", k, ")");
  }

  Tensor<T> probs = Tensor<T>::zeros({n, k});
  kernels::softmax_rows(logits.data(), probs.data(), n, k);

  const T* lg = logits.data();
  double total = 0.0;
  for (int r = 0; r < n; ++r) {
    const T* row = lg + static_cast<std::ptrdiff_t>(r) * k;
    T mx = row[0];
    for (int c = 1; c < k; ++c) mx = std::max(mx, row[c]);
    double sum = 0.0;
    for (int c = 0; c < k; ++c) sum += std::exp(static_cast<double>(row[c] - mx));
    total += std::log(sum) - static_cast<double>(row[labels[r]] - mx);
  }
  Tensor<T> loss = Tensor<T>::scalar(static_cast<T>(total / n));
  check_finite(loss, "softmax_cross_entropy");

  if (tape) {
    const int pl = tape->track(logits);
    Tensor<T> loss_ref = loss;
    Tensor<T> saved_probs = probs;
    auto saved_labels = std::make_shared<std::vector<int>>(labels);
    tape->emplace(loss, {pl}, [=](Tape<T>& tp) {
      T* gl = tp.grad_sink(pl);
      if (!gl) return;
      const T g = loss_ref.grad()[0];
      const T* p = saved_probs.data();
      const T invn = static_cast<T>(1.0 / n);
      for (int r = 0; r < n; ++r) {
        const int lbl = (*saved_labels)[r];
        for (int c = 0; c < k; ++c) {
          const T onehot = c == lbl ? T(1) : T(0);
          gl[static_cast<std::ptrdiff_t>(r) * k + c] += g * (p[static_cast<std::ptrdiff_t>(r) * k + c] - onehot) * invn;
        }
      }
    });
  }
  return {loss, probs};
}

// ---------------------------------------------------------------------------
// add / reduce_sum

template <typename T>
Tensor<T> add(Tape<T>* tape, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape())
    fail(Error::Kind::shape, "add: shape mismatch ", shape_string(a.shape()), " vs ",
         shape_string(b.shape()));
  Tensor<T> out = Tensor<T>::zeros(a.shape());
  const T* pa = a.data();
  const T* pb = b.data();
  T* y = out.data();
  const std::size_t count = a.numel();
  for (std::size_t i = 0; i < count; ++i) y[i] = pa[i] + pb[i];

  if (tape) {
    const int ia = tape->track(a);
    const int ib = tape->track(b);
    Tensor<T> out_ref = out;
    tape->emplace(out, {ia, ib}, [=](Tape<T>& tp) {
      const T* g = out_ref.grad();
      if (T* ga = tp.grad_sink(ia))
        for (std::size_t i = 0; i < count; ++i) ga[i] += g[i];
      if (T* gb = tp.grad_sink(ib))
        for (std::size_t i = 0; i < count; ++i) gb[i] += g[i];
    });
  }
  return out;
}

template <typename T>
Tensor<T> reduce_sum(Tape<T>* tape, const Tensor<T>& input) {
  const T* x = input.data();
  const std::size_t count = input.numel();
  T acc = T(0);
  for (std::size_t i = 0; i < count; ++i) acc += x[i];
  Tensor<T> out = Tensor<T>::scalar(acc);

  if (tape) {
    const int pi = tape->track(input);
    Tensor<T> out_ref = out;
    tape->emplace(out, {pi}, [=](Tape<T>& tp) {
      T* gin = tp.grad_sink(pi);
      if (!gin) return;
      const T g = out_ref.grad()[0];
      for (std::size_t i = 0; i < count; ++i) gin[i] += g;
    });
  }
  return out;
}

// ---------------------------------------------------------------------------

#define PAIRFREEZE_INSTANTIATE_OPS(T)                                                        \
  template Tensor<T> conv2d<T>(Tape<T>*, const Tensor<T>&, const Tensor<T>&,                 \
                               const Tensor<T>&, Padding);                                   \
  template Tensor<T> max_pool2d<T>(Tape<T>*, const Tensor<T>&, int);                         \
  template Tensor<T> relu<T>(Tape<T>*, const Tensor<T>&);                                    \
  template Tensor<T> dense<T>(Tape<T>*, const Tensor<T>&, const Tensor<T>&,                  \
                              const Tensor<T>&);                                             \
  template Tensor<T> dropout<T>(Tape<T>*, const Tensor<T>&, double, Mode, Rng&);             \
  template Tensor<T> flatten<T>(Tape<T>*, const Tensor<T>&);                                 \
  template Tensor<T> batch_norm2d<T>(Tape<T>*, const Tensor<T>&, const Tensor<T>&,           \
                                     const Tensor<T>&, Tensor<T>&, Tensor<T>&, Mode, double, \
                                     double);                                                \
  template Tensor<T> global_avg_pool<T>(Tape<T>*, const Tensor<T>&);                         \
  template Tensor<T> concat_channels<T>(Tape<T>*, const std::vector<Tensor<T>>&);            \
  template LossResult<T> softmax_cross_entropy<T>(Tape<T>*, const Tensor<T>&,                \
                                                  const std::vector<int>&);                  \
  template Tensor<T> add<T>(Tape<T>*, const Tensor<T>&, const Tensor<T>&);                   \
  template Tensor<T> reduce_sum<T>(Tape<T>*, const Tensor<T>&);

PAIRFREEZE_INSTANTIATE_OPS(float)
PAIRFREEZE_INSTANTIATE_OPS(double)

#undef PAIRFREEZE_INSTANTIATE_OPS

}  // namespace pairfreeze
