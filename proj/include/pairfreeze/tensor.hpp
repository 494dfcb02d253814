#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "pairfreeze/alloc_counter.hpp"
#include "pairfreeze/error.hpp"

namespace pairfreeze {

// Flat buffer whose lifetime is reported to the AllocCounter. Everything
// sizeable in the framework (activations, parameters, gradients, velocity
// buffers, snapshots, saved backward state) lives in one of these.
template <typename T>
class Storage {
 public:
  explicit Storage(std::size_t count, T fill = T(0)) : data_(count, fill) {
    AllocCounter::instance().add(bytes());
  }
  Storage(const Storage&) = delete;
  Storage& operator=(const Storage&) = delete;
  ~Storage() { AllocCounter::instance().remove(bytes()); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::size_t size() const { return data_.size(); }
  std::size_t bytes() const { return data_.size() * sizeof(T); }

 private:
  std::vector<T> data_;
};

inline std::size_t shape_numel(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d <= 0) fail(Error::Kind::shape, "tensor dimension must be positive, got ", d);
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

inline std::string shape_string(const std::vector<int>& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + ")";
}

template <typename T>
struct TensorImpl {
  std::vector<int> shape;
  std::shared_ptr<Storage<T>> data;
  std::shared_ptr<Storage<T>> grad;  // null until backward needs it
  bool requires_grad = false;
  bool leaf = true;
  // Tape linkage: which tape this tensor was last registered on, and where.
  std::uint64_t tape_id = 0;
  int node = -1;
};

// Value-semantics handle over shared tensor state. Copies alias the same
// buffers (so a Parameter and the graph see one gradient); clone() makes a
// deep copy.
template <typename T>
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<int> shape) { return full(std::move(shape), T(0)); }

  static Tensor full(std::vector<int> shape, T value) {
    Tensor t;
    t.impl_ = std::make_shared<TensorImpl<T>>();
    t.impl_->shape = std::move(shape);
    t.impl_->data = std::make_shared<Storage<T>>(shape_numel(t.impl_->shape), value);
    return t;
  }

  static Tensor from(std::vector<int> shape, const std::vector<T>& values) {
    Tensor t = zeros(std::move(shape));
    if (values.size() != t.numel())
      fail(Error::Kind::shape, "tensor data length ", values.size(),
           " does not match shape ", shape_string(t.shape()), " with ", t.numel(),
           " elements");
    std::copy(values.begin(), values.end(), t.data());
    return t;
  }

  static Tensor scalar(T value) { return full({1}, value); }

  bool defined() const { return impl_ != nullptr; }
  const std::vector<int>& shape() const { return impl_->shape; }
  int ndim() const { return static_cast<int>(impl_->shape.size()); }
  int dim(std::size_t i) const { return impl_->shape[i]; }
  std::size_t numel() const { return impl_->data->size(); }
  std::size_t bytes() const { return impl_->data->bytes(); }

  T* data() { return impl_->data->data(); }
  const T* data() const { return impl_->data->data(); }
  T& operator[](std::size_t i) { return data()[i]; }
  T operator[](std::size_t i) const { return data()[i]; }

  T item() const {
    if (numel() != 1) fail(Error::Kind::shape, "item() on non-scalar tensor ", shape_string(shape()));
    return data()[0];
  }

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool flag) { impl_->requires_grad = flag; }
  bool is_leaf() const { return impl_->leaf; }

  bool has_grad() const { return impl_ && impl_->grad != nullptr; }
  T* grad() { return impl_->grad ? impl_->grad->data() : nullptr; }
  const T* grad() const { return impl_->grad ? impl_->grad->data() : nullptr; }

  void ensure_grad() {
    if (!impl_->grad) impl_->grad = std::make_shared<Storage<T>>(numel(), T(0));
  }
  void drop_grad() { impl_->grad.reset(); }

  // Deep copy of the data; the result is a fresh leaf with no grad.
  Tensor clone() const {
    Tensor t = zeros(shape());
    std::copy(data(), data() + numel(), t.data());
    return t;
  }

  // New tensor sharing this one's data buffer under a different shape.
  Tensor reshaped(std::vector<int> new_shape) const {
    if (shape_numel(new_shape) != numel())
      fail(Error::Kind::shape, "cannot reshape ", shape_string(shape()), " to ",
           shape_string(new_shape));
    Tensor t;
    t.impl_ = std::make_shared<TensorImpl<T>>();
    t.impl_->shape = std::move(new_shape);
    t.impl_->data = impl_->data;
    return t;
  }

  void copy_from(const Tensor& src) {
    if (src.numel() != numel())
      fail(Error::Kind::shape, "copy_from size mismatch: ", shape_string(src.shape()),
           " into ", shape_string(shape()));
    std::copy(src.data(), src.data() + numel(), data());
  }

  void reset() { impl_.reset(); }

  TensorImpl<T>* impl() const { return impl_.get(); }

 private:
  std::shared_ptr<TensorImpl<T>> impl_;
};

}  // namespace pairfreeze
