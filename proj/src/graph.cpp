// Copyright 2026 The MSVQ Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "msvq/graph.hpp"

#include <cmath>
#include <utility>

namespace msvq {

const Tensor& Var::value() const { return graph_->value(*this); }
const Tensor& Var::grad() const { return graph_->grad(*this); }
bool Var::requires_grad() const { return graph_->requires_grad(*this); }

Var Graph::push(Node n) {
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Graph::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Graph::parameter(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = mode_ == GradMode::kRecord;
  return push(std::move(n));
}

Var Graph::parameter_ref(const Tensor& value, Tensor* grad_sink) {
  Node n;
  n.external = &value;
  n.requires_grad = mode_ == GradMode::kRecord;
  if (grad_sink) {
    require_same_dims(value, *grad_sink, "parameter gradient sink");
    n.grad_sink = grad_sink;
  }
  return push(std::move(n));
}

Var Graph::record(Tensor value, std::initializer_list<Var> inputs, BackwardFn fn) {
  return record(std::move(value), std::vector<Var>(inputs), std::move(fn));
}

Var Graph::record(Tensor value, const std::vector<Var>& inputs, BackwardFn fn) {
  Node n;
  n.value = std::move(value);
  if (mode_ == GradMode::kRecord) {
    for (const Var& v : inputs) {
      if (v.graph_ != this) throw std::logic_error("operand belongs to another graph");
      if (node(v.id_).requires_grad) n.requires_grad = true;
    }
  }
  if (n.requires_grad) n.backward = std::move(fn);
  return push(std::move(n));
}

Tensor& Graph::grad_buffer(int id) {
  Node& n = node(id);
  if (n.grad_sink) {
    n.has_grad = true;
    return *n.grad_sink;
  }
  if (!n.has_grad) {
    n.grad = Tensor(n.get().dims(), 0.0f);
    n.has_grad = true;
  }
  return n.grad;
}

const Tensor* Graph::incoming_grad(int id) const {
  const Node& n = node(id);
  if (!n.has_grad) return nullptr;
  return n.grad_sink ? n.grad_sink : &n.grad;
}

const Tensor& Graph::grad(Var v) {
  const Tensor* g = incoming_grad(v.id_);
  if (g) return *g;
  zeros_ = Tensor(value(v).dims(), 0.0f);
  return zeros_;
}

void Graph::backward(Var loss) {
  const Tensor& l = value(loss);
  if (l.size() != 1) {
    throw ShapeError("backward on non-scalar of shape " + to_string(l.dims()));
  }
  if (!std::isfinite(l[0])) throw NumericError("non-finite loss");
  if (!node(loss.id_).requires_grad) return;
  grad_buffer(loss.id_)[0] += 1.0f;
  for (int id = loss.id_; id >= 0; --id) {
    Node& n = node(id);
    if (n.has_grad && n.backward) n.backward(*this, id);
  }
}

}  // namespace msvq
