#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

namespace ncr {

// Errors raised by shape/configuration checks. Message names the offending
// dimension where one exists.
struct ShapeError : std::runtime_error {
  explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};
struct UsageError : std::runtime_error {
  explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

// Thread-local autodiff switch. Inference paths disable recording so tensors
// can be produced concurrently without a shared tape.
inline bool& grad_mode() {
  thread_local bool enabled = true;
  return enabled;
}

struct NoGradGuard {
  bool prev;
  NoGradGuard() : prev(grad_mode()) { grad_mode() = false; }
  ~NoGradGuard() { grad_mode() = prev; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;
};

namespace detail {

template <typename T>
struct Node {
  std::vector<int> shape;
  std::vector<T> v;  // values, contiguous, channel-major for images
  std::vector<T> g;  // gradient; sized lazily, same extent as v
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void()> backprop;  // accumulates this->g into parents' g

  int numel() const { return static_cast<int>(v.size()); }
  bool is_leaf() const { return parents.empty(); }
  void ensure_grad() {
    if (g.size() != v.size()) g.assign(v.size(), T(0));
  }
};

inline long long shape_numel(const std::vector<int>& shape) {
  long long n = 1;
  for (int e : shape) {
    if (e <= 0) throw ShapeError("tensor extent must be positive, got " + std::to_string(e));
    n *= e;
  }
  return n;
}

}  // namespace detail

// Dense N-d array with an optional gradient slot and a recorded backward
// function. Value semantics on the handle; the node is shared.
template <typename T>
class TensorT {
 public:
  using Scalar = T;
  using NodePtr = std::shared_ptr<detail::Node<T>>;

  TensorT() = default;
  explicit TensorT(NodePtr n) : n_(std::move(n)) {}

  static TensorT zeros(std::vector<int> shape) { return full(std::move(shape), T(0)); }

  static TensorT full(std::vector<int> shape, T value) {
    auto n = std::make_shared<detail::Node<T>>();
    long long count = detail::shape_numel(shape);
    n->shape = std::move(shape);
    n->v.assign(static_cast<size_t>(count), value);
    return TensorT(std::move(n));
  }

  static TensorT from(std::vector<int> shape, std::vector<T> values) {
    long long count = detail::shape_numel(shape);
    if (static_cast<long long>(values.size()) != count)
      throw ShapeError("value count " + std::to_string(values.size()) +
                       " does not match shape product " + std::to_string(count));
    auto n = std::make_shared<detail::Node<T>>();
    n->shape = std::move(shape);
    n->v = std::move(values);
    return TensorT(std::move(n));
  }

  static TensorT scalar(T value) { return full({1}, value); }

  static TensorT randn(std::vector<int> shape, std::mt19937& rng, T stddev, T mean = T(0)) {
    TensorT t = zeros(std::move(shape));
    std::normal_distribution<double> dist(0.0, 1.0);
    for (auto& x : t.n_->v) x = mean + stddev * static_cast<T>(dist(rng));
    return t;
  }

  bool defined() const { return n_ != nullptr; }
  const std::vector<int>& shape() const { return n_->shape; }
  int rank() const { return static_cast<int>(n_->shape.size()); }
  int dim(int i) const { return n_->shape.at(static_cast<size_t>(i)); }
  int numel() const { return n_->numel(); }

  T* data() { return n_->v.data(); }
  const T* data() const { return n_->v.data(); }
  std::vector<T>& values() { return n_->v; }
  const std::vector<T>& values() const { return n_->v; }

  T item() const {
    if (numel() != 1) throw UsageError("item() requires a scalar tensor");
    return n_->v[0];
  }

  bool requires_grad() const { return n_->requires_grad; }
  TensorT& set_requires_grad(bool b) {
    n_->requires_grad = b;
    if (b) n_->ensure_grad();
    return *this;
  }

  bool has_grad() const { return !n_->g.empty(); }
  std::vector<T>& grad() {
    n_->ensure_grad();
    return n_->g;
  }
  const std::vector<T>& grad() const {
    if (n_->g.empty()) throw UsageError("gradient not populated");
    return n_->g;
  }
  void zero_grad() { n_->g.assign(n_->v.size(), T(0)); }

  // Value-only copy, detached from the recorded graph.
  TensorT detach() const {
    auto n = std::make_shared<detail::Node<T>>();
    n->shape = n_->shape;
    n->v = n_->v;
    return TensorT(std::move(n));
  }

  // Reverse-mode sweep from a scalar. Transient gradients of interior nodes
  // are reset per call; leaf gradients accumulate until explicitly zeroed.
  void backward() const {
    if (numel() != 1) throw UsageError("backward() requires a scalar loss");
    std::vector<detail::Node<T>*> order;
    std::unordered_set<detail::Node<T>*> seen;
    topo(n_.get(), seen, order);  // post-order: parents before consumers
    for (auto* node : order) {
      if (!node->is_leaf())
        node->g.assign(node->v.size(), T(0));
      else if (node->requires_grad)
        node->ensure_grad();
    }
    n_->ensure_grad();
    n_->g[0] += T(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it)
      if ((*it)->backprop) (*it)->backprop();
  }

  NodePtr node() const { return n_; }

 private:
  static void topo(detail::Node<T>* node, std::unordered_set<detail::Node<T>*>& seen,
                   std::vector<detail::Node<T>*>& order) {
    if (!seen.insert(node).second) return;
    for (auto& p : node->parents) topo(p.get(), seen, order);
    order.push_back(node);
  }

  NodePtr n_;
};

using Tensor = TensorT<float>;

namespace detail {

// Builds the output node of a recorded op. `parents` are the differentiable
// inputs; `backprop` runs with out->g populated.
template <typename T>
void record(TensorT<T>& out, std::vector<TensorT<T>> parents, std::function<void()> backprop) {
  if (!grad_mode()) return;
  bool needs = false;
  for (const auto& p : parents) needs = needs || p.node()->requires_grad;
  if (!needs) return;
  auto n = out.node();
  n->requires_grad = true;
  n->parents.reserve(parents.size());
  for (auto& p : parents) n->parents.push_back(p.node());
  n->backprop = std::move(backprop);
}

}  // namespace detail

}  // namespace ncr
