// Copyright 2026 The talkface Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace talkface {

using Shape = std::vector<std::size_t>;

std::string shape_to_string(const Shape& shape);
std::size_t shape_size(const Shape& shape);

namespace detail {

// One vertex of the differentiation graph. Values are immutable once the
// node has been produced by an operation; only leaves may be edited in place.
struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;
  const char* op = "leaf";

  bool is_leaf() const { return inputs.empty() && !backward; }
  std::vector<double>& ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
    return grad;
  }
};

}  // namespace detail

// Shared handle to a dense row-major array of doubles that participates in
// reverse-mode differentiation. Copies alias the same node.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values,
                     bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor vector(std::initializer_list<double> values,
                       bool requires_grad = false);

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const;

  std::span<const double> data() const;
  // In-place edit; only allowed on leaves (parameters, inputs).
  std::span<double> mutable_data();
  double item() const;
  double at(std::initializer_list<std::size_t> index) const;

  bool requires_grad() const;
  void set_requires_grad(bool flag);
  bool is_leaf() const;

  // Accumulated gradient; empty when nothing has been accumulated yet.
  std::span<const double> grad() const;
  Tensor grad_tensor() const;
  void zero_grad();

  // Fresh leaf holding a copy of the values, cut from the graph.
  Tensor detach() const;
  Tensor clone(bool requires_grad) const;

  const detail::Node* id() const { return node_.get(); }
  const std::shared_ptr<detail::Node>& node() const { return node_; }
  const char* op_name() const;

 private:
  std::shared_ptr<detail::Node> node_;
};

// Gradients of the leaves reached by one backward pass, keyed by node identity.
class GradientMap {
 public:
  bool contains(const Tensor& leaf) const;
  const Tensor& at(const Tensor& leaf) const;
  std::size_t size() const { return grads_.size(); }
  bool empty() const { return grads_.empty(); }
  void insert(const detail::Node* key, Tensor grad);

 private:
  std::unordered_map<const detail::Node*, Tensor> grads_;
};

// Differentiates a one-element root. Leaf gradients accumulate across calls
// until zero_grad().
GradientMap backward(const Tensor& root);

// Builds the result of an operation. When no input requires a gradient the
// graph edge is dropped and the result is a plain constant.
Tensor make_result(const char* op, Shape shape, std::vector<double> value,
                   std::vector<Tensor> inputs,
                   std::function<void(detail::Node&)> backward_fn);

}  // namespace talkface
