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

#include "talkface/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>

#include "talkface/error.hpp"

namespace talkface {

std::string shape_to_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto extent : shape) n *= extent;
  return n;
}

namespace {

std::shared_ptr<detail::Node> new_leaf(Shape shape, std::vector<double> values,
                                       bool requires_grad) {
  for (auto extent : shape) {
    if (extent == 0) {
      throw ShapeError("tensor extents must be positive, got " +
                       shape_to_string(shape));
    }
  }
  if (values.size() != shape_size(shape)) {
    throw ShapeError("tensor data length " + std::to_string(values.size()) +
                     " does not match shape " + shape_to_string(shape));
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  return node;
}

const detail::Node& checked(const std::shared_ptr<detail::Node>& node) {
  if (!node) throw ContractError("use of an undefined tensor");
  return *node;
}

}  // namespace

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  std::vector<double> values(shape_size(shape), value);
  return Tensor(new_leaf(std::move(shape), std::move(values), requires_grad));
}

Tensor Tensor::from(Shape shape, std::vector<double> values,
                    bool requires_grad) {
  return Tensor(new_leaf(std::move(shape), std::move(values), requires_grad));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from({1}, {value}, requires_grad);
}

Tensor Tensor::vector(std::initializer_list<double> values,
                      bool requires_grad) {
  return from({values.size()}, std::vector<double>(values), requires_grad);
}

const Shape& Tensor::shape() const { return checked(node_).shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  const auto& s = shape();
  if (axis >= s.size()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for " +
                     shape_to_string(s));
  }
  return s[axis];
}

std::size_t Tensor::size() const { return checked(node_).value.size(); }

std::span<const double> Tensor::data() const { return checked(node_).value; }

std::span<double> Tensor::mutable_data() {
  checked(node_);
  if (!node_->is_leaf()) {
    throw ContractError(std::string("cannot edit the output of operation '") +
                        node_->op + "' in place");
  }
  return node_->value;
}

double Tensor::item() const {
  const auto& n = checked(node_);
  if (n.value.size() != 1) {
    throw ContractError("item() requires a one-element tensor, got " +
                        shape_to_string(n.shape));
  }
  return n.value[0];
}

double Tensor::at(std::initializer_list<std::size_t> index) const {
  const auto& n = checked(node_);
  if (index.size() != n.shape.size()) {
    throw ShapeError("index rank " + std::to_string(index.size()) +
                     " does not match " + shape_to_string(n.shape));
  }
  std::size_t flat = 0;
  std::size_t axis = 0;
  for (auto i : index) {
    if (i >= n.shape[axis]) {
      throw ShapeError("index out of range for " + shape_to_string(n.shape));
    }
    flat = flat * n.shape[axis] + i;
    ++axis;
  }
  return n.value[flat];
}

bool Tensor::requires_grad() const { return checked(node_).requires_grad; }

void Tensor::set_requires_grad(bool flag) {
  checked(node_);
  if (!node_->is_leaf()) {
    throw ContractError("requires_grad can only be toggled on leaves");
  }
  node_->requires_grad = flag;
  if (!flag) node_->grad.clear();
}

bool Tensor::is_leaf() const { return checked(node_).is_leaf(); }

std::span<const double> Tensor::grad() const { return checked(node_).grad; }

Tensor Tensor::grad_tensor() const {
  const auto& n = checked(node_);
  if (n.grad.empty()) return Tensor::zeros(n.shape);
  return Tensor::from(n.shape, n.grad);
}

void Tensor::zero_grad() {
  checked(node_);
  node_->grad.clear();
}

Tensor Tensor::detach() const { return clone(false); }

Tensor Tensor::clone(bool requires_grad) const {
  const auto& n = checked(node_);
  return Tensor::from(n.shape, n.value, requires_grad);
}

const char* Tensor::op_name() const { return checked(node_).op; }

bool GradientMap::contains(const Tensor& leaf) const {
  return grads_.count(leaf.id()) != 0;
}

const Tensor& GradientMap::at(const Tensor& leaf) const {
  auto it = grads_.find(leaf.id());
  if (it == grads_.end()) {
    throw ContractError("tensor is not a differentiated leaf of this graph");
  }
  return it->second;
}

void GradientMap::insert(const detail::Node* key, Tensor grad) {
  grads_.insert_or_assign(key, std::move(grad));
}

Tensor make_result(const char* op, Shape shape, std::vector<double> value,
                   std::vector<Tensor> inputs,
                   std::function<void(detail::Node&)> backward_fn) {
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  node->op = op;
  const bool any = std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) {
    return t.requires_grad();
  });
  if (any) {
    node->requires_grad = true;
    node->inputs.reserve(inputs.size());
    for (auto& t : inputs) node->inputs.push_back(t.node());
    node->backward = std::move(backward_fn);
  }
  return Tensor(std::move(node));
}

GradientMap backward(const Tensor& root) {
  if (!root.defined()) throw ContractError("backward on an undefined tensor");
  if (root.size() != 1) {
    throw ContractError("backward requires a scalar root, got shape " +
                        shape_to_string(root.shape()));
  }
  GradientMap result;
  if (!root.requires_grad()) return result;

  // Iterative post-order DFS gives a topological order (inputs first).
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> visited;
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  visited.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      detail::Node* child = node->inputs[next++].get();
      if (child->requires_grad && visited.insert(child).second) {
        stack.emplace_back(child, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (auto* node : order) {
    if (!node->is_leaf()) node->grad.assign(node->value.size(), 0.0);
  }
  root.node()->ensure_grad()[0] += 1.0;

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* node = *it;
    if (node->is_leaf()) continue;
    node->backward(*node);
  }

  for (auto* node : order) {
    if (node->is_leaf()) {
      result.insert(node, Tensor::from(node->shape, node->ensure_grad()));
    } else {
      std::vector<double>().swap(node->grad);
    }
  }
  return result;
}

}  // namespace talkface
