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

#ifndef MSVQ_GRAPH_HPP_
#define MSVQ_GRAPH_HPP_

#include <cstddef>
#include <deque>
#include <functional>
#include <vector>

#include "msvq/tensor.hpp"

namespace msvq {

class Graph;

/// Lightweight handle to a node recorded in a Graph.
class Var {
 public:
  Var() = default;

  bool valid() const { return graph_ != nullptr; }
  int id() const { return id_; }
  Graph& graph() const { return *graph_; }
  const Tensor& value() const;
  const Tensor& grad() const;
  bool requires_grad() const;

 private:
  friend class Graph;
  Var(Graph* g, int id) : graph_(g), id_(id) {}

  Graph* graph_ = nullptr;
  int id_ = -1;
};

enum class GradMode { kRecord, kInference };

/// Tape of executed operations for one forward+backward episode.
///
/// Nodes are appended in execution order, so the tape is already a
/// topological order and backward is a single reverse sweep. A Graph is
/// single-writer; build one per episode (per image in training).
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, int)>;

  explicit Graph(GradMode mode = GradMode::kRecord) : mode_(mode) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  GradMode mode() const { return mode_; }
  std::size_t size() const { return nodes_.size(); }

  /// A leaf that never receives gradient.
  Var constant(Tensor value);
  /// A leaf that receives gradient (a constant in inference mode).
  Var parameter(Tensor value);
  /// A parameter leaf that reads `value` in place; gradient is accumulated
  /// into `*grad_sink` when non-null. Both must outlive the graph.
  Var parameter_ref(const Tensor& value, Tensor* grad_sink);

  const Tensor& value(Var v) const { return node(v.id_).get(); }
  /// Gradient of the last backward() target w.r.t. v; zeros if none flowed.
  const Tensor& grad(Var v);
  bool requires_grad(Var v) const { return node(v.id_).requires_grad; }

  /// Reverse sweep from a scalar loss. Throws ShapeError for non-scalar
  /// losses and NumericError for non-finite ones.
  void backward(Var loss);

  // Op-implementation surface.
  Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn fn);
  Var record(Tensor value, const std::vector<Var>& inputs, BackwardFn fn);
  const Tensor& value(int id) const { return node(id).get(); }
  bool requires_grad(int id) const { return node(id).requires_grad; }
  /// Gradient accumulator of node `id`, zero-initialized on first access.
  Tensor& grad_buffer(int id);
  /// Gradient flowing into node `id` during backward, or nullptr if none.
  const Tensor* incoming_grad(int id) const;

 private:
  struct Node {
    Tensor value;
    const Tensor* external = nullptr;
    Tensor grad;
    Tensor* grad_sink = nullptr;
    bool requires_grad = false;
    bool has_grad = false;
    BackwardFn backward;

    const Tensor& get() const { return external ? *external : value; }
  };

  Node& node(int id) { return nodes_.at(static_cast<std::size_t>(id)); }
  const Node& node(int id) const { return nodes_.at(static_cast<std::size_t>(id)); }
  Var push(Node n);

  GradMode mode_;
  std::deque<Node> nodes_;
  Tensor zeros_;
};

}  // namespace msvq

#endif  // MSVQ_GRAPH_HPP_
