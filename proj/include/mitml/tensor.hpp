/*
 * Copyright 2026 The mitml Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef MITML_TENSOR_HPP
#define MITML_TENSOR_HPP

#include <cstdint>
#include <functional>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

namespace mitml {

using Shape = std::vector<int>;

namespace detail {

template <typename... Parts>
std::string cat(Parts&&... parts) {
  std::ostringstream os;
  (os << ... << parts);
  return os.str();
}

}  // namespace detail

[[noreturn]] inline void fail(const std::string& msg) {
  throw std::invalid_argument(msg);
}

#define MITML_CHECK(cond, ...) \
  do {                         \
    if (!(cond)) ::mitml::fail(::mitml::detail::cat(__VA_ARGS__)); \
  } while (0)

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
  os << ']';
  return os.str();
}

inline std::int64_t numel(const Shape& s) {
  std::int64_t n = 1;
  for (int d : s) {
    MITML_CHECK(d > 0, "dimension sizes must be positive, got ", shape_str(s));
    n *= d;
  }
  return n;
}

struct TensorImpl;

/// One backward-graph record. A node is owned by the tensor it produced and
/// holds shared ownership of the parent tensors, which keeps every
/// intermediate of a forward pass alive until the result is dropped.
struct Node {
  std::vector<std::shared_ptr<TensorImpl>> parents;
  // Reads the output's accumulated gradient and adds each parent's
  // contribution into that parent's grad buffer.
  std::function<void(const TensorImpl& out)> backward;
};

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  bool requires_grad = false;
  std::vector<double> grad;  // empty until first touched; data.size() after
  std::shared_ptr<Node> node;

  bool tracks_grad() const { return requires_grad || node != nullptr; }
  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
  }
};

/// N-dimensional float64 array with an optional reverse-mode graph record.
/// Value semantics over a shared buffer: copies alias the same storage.
/// Tensors are immutable once they participate in a graph; only leaf
/// parameters are mutated in place (by the optimizer, between passes).
class Tensor {
 public:
  Tensor() = default;

  static Tensor from_data(Shape shape, std::vector<double> data,
                          bool requires_grad = false) {
    MITML_CHECK(numel(shape) == static_cast<std::int64_t>(data.size()),
                "shape ", shape_str(shape), " wants ", numel(shape),
                " values, got ", data.size());
    auto impl = std::make_shared<TensorImpl>();
    impl->shape = std::move(shape);
    impl->data = std::move(data);
    impl->requires_grad = requires_grad;
    return Tensor(std::move(impl));
  }

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    std::vector<double> d(static_cast<std::size_t>(numel(shape)), 0.0);
    return from_data(std::move(shape), std::move(d), requires_grad);
  }

  static Tensor full(Shape shape, double value, bool requires_grad = false) {
    std::vector<double> d(static_cast<std::size_t>(numel(shape)), value);
    return from_data(std::move(shape), std::move(d), requires_grad);
  }

  static Tensor scalar(double value, bool requires_grad = false) {
    return from_data({1}, {value}, requires_grad);
  }

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  int rank() const { return static_cast<int>(impl_->shape.size()); }
  int dim(int i) const { return impl_->shape.at(static_cast<std::size_t>(i)); }
  std::int64_t size() const {
    return static_cast<std::int64_t>(impl_->data.size());
  }

  const std::vector<double>& data() const { return impl_->data; }
  /// In-place access; only meaningful for leaf tensors between passes.
  std::vector<double>& mutable_data() { return impl_->data; }

  double operator[](std::int64_t i) const {
    return impl_->data[static_cast<std::size_t>(i)];
  }
  double item() const {
    MITML_CHECK(size() == 1, "item() requires a one-element tensor, shape is ",
                shape_str(shape()));
    return impl_->data[0];
  }

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool v) { impl_->requires_grad = v; }
  bool has_node() const { return impl_->node != nullptr; }
  bool tracks_grad() const { return impl_->tracks_grad(); }

  bool has_grad() const { return !impl_->grad.empty(); }
  const std::vector<double>& grad() const {
    static const std::vector<double> empty;
    return impl_->grad.empty() ? empty : impl_->grad;
  }
  double grad_at(std::int64_t i) const {
    return impl_->grad.empty() ? 0.0
                               : impl_->grad[static_cast<std::size_t>(i)];
  }
  void zero_grad() {
    if (!impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), 0.0);
  }

  /// Same values, no graph edge, no gradient requirement. Data is copied so
  /// later parameter updates cannot leak through.
  Tensor detach() const {
    auto impl = std::make_shared<TensorImpl>();
    impl->shape = impl_->shape;
    impl->data = impl_->data;
    return Tensor(std::move(impl));
  }

  /// Reverse-mode sweep from a scalar. Seeds d(self)/d(self) = 1 and runs
  /// every reachable node once, in reverse topological order. Contributions
  /// from multiple uses of a tensor accumulate by summation.
  void backward() const {
    MITML_CHECK(size() == 1, "backward() requires a scalar loss, shape is ",
                shape_str(shape()));
    impl_->ensure_grad();
    impl_->grad[0] = 1.0;
    if (!impl_->node) return;

    // Iterative post-order DFS over the impl graph; reversed post-order is a
    // topological order, so each consumer runs before its producers.
    std::vector<TensorImpl*> order;
    std::unordered_set<TensorImpl*> seen;
    struct Frame {
      TensorImpl* impl;
      std::size_t next_parent;
    };
    std::vector<Frame> stack;
    stack.push_back({impl_.get(), 0});
    seen.insert(impl_.get());
    while (!stack.empty()) {
      Frame& top = stack.back();
      Node* node = top.impl->node.get();
      if (node && top.next_parent < node->parents.size()) {
        TensorImpl* parent = node->parents[top.next_parent++].get();
        if (parent->node && seen.insert(parent).second) {
          stack.push_back({parent, 0});
        }
      } else {
        order.push_back(top.impl);
        stack.pop_back();
      }
    }
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      TensorImpl* impl = *it;
      if (impl->grad.empty()) continue;  // no gradient ever reached this node
      impl->node->backward(*impl);
    }
  }

  const std::shared_ptr<TensorImpl>& impl() const { return impl_; }

 private:
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}
  friend Tensor make_op(Shape, std::vector<double>, std::vector<Tensor>,
                        std::function<void(const TensorImpl&)>);

  std::shared_ptr<TensorImpl> impl_;
};

/// Builds an op result. The backward record is attached only when some input
/// participates in gradient tracking; otherwise the output is a plain value.
inline Tensor make_op(Shape shape, std::vector<double> data,
                      std::vector<Tensor> inputs,
                      std::function<void(const TensorImpl&)> backward) {
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  bool tracked = false;
  for (const Tensor& t : inputs) tracked = tracked || t.tracks_grad();
  if (tracked) {
    auto node = std::make_shared<Node>();
    node->parents.reserve(inputs.size());
    for (const Tensor& t : inputs) node->parents.push_back(t.impl());
    node->backward = std::move(backward);
    impl->node = std::move(node);
  }
  return Tensor(std::move(impl));
}

namespace detail {

/// Returns the grad buffer to accumulate into, or nullptr when the parent
/// does not participate in the backward pass.
inline double* grad_sink(TensorImpl& parent) {
  if (!parent.tracks_grad()) return nullptr;
  parent.ensure_grad();
  return parent.grad.data();
}

}  // namespace detail

}  // namespace mitml

#endif  // MITML_TENSOR_HPP
