#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <new>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "pointvig/error.hpp"

namespace pointvig {

using Shape = std::vector<std::size_t>;
using Index = std::int64_t;

inline std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

/// 64-byte aligned storage. Vectorized kernels pick their peeling from the
/// buffer address, so a fixed alignment keeps results bit-identical run to run.
template <class T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};

  AlignedAllocator() = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlign); }

  template <class U>
  bool operator==(const AlignedAllocator<U>&) const noexcept { return true; }
};

template <class T>
using Buffer = std::vector<T, AlignedAllocator<T>>;

namespace detail {

inline bool& grad_mode_flag() {
  thread_local bool enabled = true;
  return enabled;
}

template <class T>
struct TensorNode {
  Shape shape;
  Buffer<T> data;
  Buffer<T> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorNode>> parents;
  // Reads this node's grad and accumulates into the parents' grads.
  std::function<void(TensorNode&)> backward_fn;

  bool is_leaf() const { return !backward_fn; }

  Buffer<T>& ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), T(0));
    return grad;
  }
};

}  // namespace detail

inline bool grad_enabled() { return detail::grad_mode_flag(); }

/// Disables graph recording on the current thread for the guard's lifetime.
class NoGradGuard {
 public:
  NoGradGuard() : previous_(detail::grad_mode_flag()) { detail::grad_mode_flag() = false; }
  ~NoGradGuard() { detail::grad_mode_flag() = previous_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Dense row-major tensor with an optional gradient buffer.
///
/// A Tensor is a shared handle: copies alias the same storage, the way the
/// autograd tape needs them to. Values produced by ops are never mutated
/// afterwards; only leaves (parameters, inputs) are written to directly.
template <class T>
class Tensor {
 public:
  using value_type = T;
  using Node = detail::TensorNode<T>;

  Tensor() = default;

  static Tensor zeros(Shape shape) {
    const std::size_t n = shape_numel(shape);
    return Tensor(std::move(shape), Buffer<T>(n, T(0)));
  }

  static Tensor full(Shape shape, T value) {
    const std::size_t n = shape_numel(shape);
    return Tensor(std::move(shape), Buffer<T>(n, value));
  }

  Tensor(Shape shape, const std::vector<T>& data) : Tensor(std::move(shape), Buffer<T>(data.begin(), data.end())) {}
  Tensor(Shape shape, std::initializer_list<T> data) : Tensor(std::move(shape), Buffer<T>(data)) {}
  Tensor(Shape shape, Buffer<T> data) : node_(std::make_shared<Node>()) {
    if (shape_numel(shape) != data.size())
      throw Error(ErrorKind::dimension, "shape " + shape_str(shape) + " holds " + std::to_string(shape_numel(shape)) +
                                            " elements but " + std::to_string(data.size()) + " were given");
    node_->shape = std::move(shape);
    node_->data = std::move(data);
  }

  bool defined() const { return static_cast<bool>(node_); }

  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return node_->shape.at(axis); }
  std::size_t numel() const { return node_->data.size(); }

  std::span<const T> data() const { return node_->data; }
  // Direct writes are for leaves only (initialisers, optimisers, fixtures).
  std::span<T> mutable_data() { return node_->data; }

  T operator[](std::size_t i) const { return node_->data[i]; }
  T at(std::size_t row, std::size_t col) const { return node_->data[row * node_->shape[1] + col]; }
  T item() const {
    require(numel() == 1, ErrorKind::dimension, "item() on tensor of shape " + shape_str(shape()));
    return node_->data[0];
  }

  bool requires_grad() const { return node_->requires_grad; }
  Tensor& set_requires_grad(bool on) {
    node_->requires_grad = on;
    return *this;
  }

  bool has_grad() const { return node_->grad.size() == node_->data.size() && !node_->data.empty(); }
  std::span<const T> grad() const { return node_->grad; }
  std::span<T> mutable_grad() { return node_->ensure_grad(); }
  void zero_grad() { node_->grad.assign(node_->data.size(), T(0)); }
  void clear_grad() { node_->grad.clear(); }

  /// Deep copy of the values, detached from any graph.
  Tensor clone() const { return Tensor(shape(), node_->data); }

  /// Same values under a new shape; gradient flows back unchanged.
  Tensor reshape(Shape new_shape) const;

  /// Reverse-mode sweep from this tensor. A non-scalar root is seeded with ones.
  /// Leaf gradients accumulate across calls; interior gradients are rebuilt.
  void backward() const;

  const std::shared_ptr<Node>& node() const { return node_; }

  static Tensor from_node(std::shared_ptr<Node> node) {
    Tensor t;
    t.node_ = std::move(node);
    return t;
  }

 private:
  std::shared_ptr<Node> node_;
};

/// Builds an op result, recording the backward closure only when grad mode is
/// on and at least one parent participates in differentiation.
template <class T>
Tensor<T> make_result(Shape shape, Buffer<T> data, std::vector<Tensor<T>> parents,
                      std::function<void(detail::TensorNode<T>&)> backward_fn) {
  Tensor<T> out(std::move(shape), std::move(data));
  if (!grad_enabled()) return out;
  const bool any = std::any_of(parents.begin(), parents.end(),
                               [](const Tensor<T>& p) { return p.defined() && p.requires_grad(); });
  if (!any) return out;
  auto& node = *out.node();
  node.requires_grad = true;
  node.parents.reserve(parents.size());
  for (auto& p : parents) node.parents.push_back(p.node());
  node.backward_fn = std::move(backward_fn);
  return out;
}

template <class T>
Tensor<T> Tensor<T>::reshape(Shape new_shape) const {
  require(shape_numel(new_shape) == numel(), ErrorKind::dimension,
          "cannot reshape " + shape_str(shape()) + " to " + shape_str(new_shape));
  return make_result<T>(std::move(new_shape), node_->data, {*this}, [](Node& self) {
    auto& parent = *self.parents[0];
    if (!parent.requires_grad) return;
    auto& g = parent.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

template <class T>
void Tensor<T>::backward() const {
  // Iterative post-order DFS to get a topological order of differentiable nodes.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{node_.get(), 0}};
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) stack.push_back({parent, 0});
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  for (Node* n : order)
    if (!n->is_leaf()) n->grad.assign(n->data.size(), T(0));

  auto& root_grad = node_->ensure_grad();
  for (auto& g : root_grad) g += T(1);

  for (auto it = order.rbegin(); it != order.rend(); ++it)
    if (!(*it)->is_leaf()) (*it)->backward_fn(**it);
}

}  // namespace pointvig
