#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <vector>

#include "pairfreeze/rng.hpp"
#include "pairfreeze/tensor.hpp"

namespace pairfreeze {

enum class Padding { same, valid };
enum class Mode { train, eval };

template <typename T>
class Tape;

template <typename T>
struct TapeNode {
  Tensor<T> out;
  std::vector<int> parents;
  std::function<void(Tape<T>&)> backward;  // null for leaves
  bool needs_grad = false;  // some leaf below this node wants a gradient
};

// Append-only record of the forward pass. Node ids grow with program order,
// so parents always precede their consumers and one reverse sweep visits
// every node exactly once. Nodes are retired as the sweep passes them, which
// releases saved activations and transient gradients early.
template <typename T>
class Tape {
 public:
  Tape() : id_(next_id()) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  std::uint64_t id() const { return id_; }
  std::size_t size() const { return nodes_.size(); }

  // Node id for `t` on this tape. Leaves register lazily; a non-leaf tensor
  // produced on another tape is rejected.
  int track(const Tensor<T>& t) {
    TensorImpl<T>* impl = t.impl();
    if (impl->tape_id == id_ && impl->node >= 0) return impl->node;
    if (!impl->leaf)
      fail(Error::Kind::state, "tensor belongs to a foreign tape (id ", impl->tape_id,
           ", expected ", id_, ")");
    impl->tape_id = id_;
    impl->node = static_cast<int>(nodes_.size());
    TapeNode<T> node;
    node.out = t;
    node.needs_grad = impl->requires_grad;
    nodes_.push_back(std::move(node));
    return impl->node;
  }

  // Register an op result. `out` must be freshly created by the op.
  int emplace(Tensor<T>& out, std::vector<int> parents, std::function<void(Tape<T>&)> backward) {
    TensorImpl<T>* impl = out.impl();
    impl->leaf = false;
    impl->tape_id = id_;
    impl->node = static_cast<int>(nodes_.size());
    TapeNode<T> node;
    node.out = out;
    node.parents = std::move(parents);
    node.backward = std::move(backward);
    for (int p : node.parents) {
      if (nodes_[static_cast<std::size_t>(p)].needs_grad) {
        node.needs_grad = true;
        break;
      }
    }
    nodes_.push_back(std::move(node));
    return impl->node;
  }

  bool needs_grad(int node) const { return nodes_[static_cast<std::size_t>(node)].needs_grad; }

  // Gradient buffer of a parent node, or nullptr when no leaf below it needs
  // one. Allocated zeroed on first use; backward kernels accumulate into it.
  T* grad_sink(int parent) {
    TapeNode<T>& node = nodes_[static_cast<std::size_t>(parent)];
    if (!node.needs_grad) return nullptr;
    node.out.ensure_grad();
    return node.out.grad();
  }

  // Reverse sweep from `loss` (a scalar produced on this tape). Gradients of
  // tensors used by several consumers accumulate additively. Leaf tensors
  // with requires_grad keep their gradient; everything else is released as
  // the sweep retires it.
  void backward(const Tensor<T>& loss);

 private:
  static std::uint64_t next_id() {
    static std::atomic<std::uint64_t> counter{1};
    return counter.fetch_add(1);
  }

  std::uint64_t id_;
  std::vector<TapeNode<T>> nodes_;
};

// Differentiable ops. Passing tape == nullptr runs pure inference: no nodes
// are recorded and no backward state is saved.
template <typename T>
Tensor<T> conv2d(Tape<T>* tape, const Tensor<T>& input, const Tensor<T>& weight,
                 const Tensor<T>& bias, Padding padding);
template <typename T>
Tensor<T> max_pool2d(Tape<T>* tape, const Tensor<T>& input, int pool = 2);
template <typename T>
Tensor<T> relu(Tape<T>* tape, const Tensor<T>& input);
template <typename T>
Tensor<T> dense(Tape<T>* tape, const Tensor<T>& input, const Tensor<T>& weight,
                const Tensor<T>& bias);
template <typename T>
Tensor<T> dropout(Tape<T>* tape, const Tensor<T>& input, double rate, Mode mode, Rng& rng);
template <typename T>
Tensor<T> flatten(Tape<T>* tape, const Tensor<T>& input);
template <typename T>
Tensor<T> batch_norm2d(Tape<T>* tape, const Tensor<T>& input, const Tensor<T>& gamma,
                       const Tensor<T>& beta, Tensor<T>& running_mean, Tensor<T>& running_var,
                       Mode mode, double momentum, double epsilon);
template <typename T>
Tensor<T> global_avg_pool(Tape<T>* tape, const Tensor<T>& input);
template <typename T>
Tensor<T> concat_channels(Tape<T>* tape, const std::vector<Tensor<T>>& inputs);

template <typename T>
struct LossResult {
  Tensor<T> loss;   // scalar, on the tape
  Tensor<T> probs;  // detached row-wise softmax
};
template <typename T>
LossResult<T> softmax_cross_entropy(Tape<T>* tape, const Tensor<T>& logits,
                                    const std::vector<int>& labels);

// Elementwise / reduction helpers (used by tests and simple losses).
template <typename T>
Tensor<T> add(Tape<T>* tape, const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> reduce_sum(Tape<T>* tape, const Tensor<T>& input);
// Scalar dot of the flattened input with fixed coefficients; the probe loss
// used by gradient checking.
template <typename T>
Tensor<T> weighted_sum(Tape<T>* tape, const Tensor<T>& input, const std::vector<T>& weights);

// NaN/Inf screening of op outputs, enabled by PAIRFREEZE_CHECK_FINITE=1.
bool finite_checks_enabled();

}  // namespace pairfreeze
