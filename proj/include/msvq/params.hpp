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

#ifndef MSVQ_PARAMS_HPP_
#define MSVQ_PARAMS_HPP_

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "msvq/graph.hpp"

namespace msvq {

/// Named parameter tensors, iterated in lexicographic name order.
class ParamSet {
 public:
  using Map = std::map<std::string, Tensor>;

  /// Throws std::invalid_argument on a duplicate name.
  void add(const std::string& name, Tensor value);
  bool contains(const std::string& name) const { return tensors_.count(name) != 0; }
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;

  std::size_t size() const { return tensors_.size(); }
  std::size_t element_count() const;
  std::vector<std::string> names() const;

  /// Same names and dims, all zeros.
  ParamSet zeros_like() const;
  void fill(float v);
  bool bit_equal(const ParamSet& other) const;

  Map::iterator begin() { return tensors_.begin(); }
  Map::iterator end() { return tensors_.end(); }
  Map::const_iterator begin() const { return tensors_.begin(); }
  Map::const_iterator end() const { return tensors_.end(); }

 private:
  Map tensors_;
};

/// Declares one learned tensor of an architecture.
struct ParamSpec {
  std::string name;
  Shape dims;
  int fan_in = 1;  // only used for weights
  bool is_bias = false;
};

/// He-uniform weights in ±sqrt(6 / fan_in), zero biases. Deterministic for a
/// given seed; each tensor draws from its own stream keyed by name so adding a
/// tensor does not perturb the others.
ParamSet init_params(std::span<const ParamSpec> specs, std::uint64_t seed);

/// Binds ParamSet entries into a Graph as parameter leaves, created on first
/// use. In record mode gradients accumulate into `grads` when supplied.
class ParamBinding {
 public:
  ParamBinding(Graph& graph, const ParamSet& params, ParamSet* grads = nullptr)
      : graph_(graph), params_(params), grads_(grads) {}

  Var operator()(const std::string& name);
  Graph& graph() { return graph_; }

 private:
  Graph& graph_;
  const ParamSet& params_;
  ParamSet* grads_;
  std::map<std::string, Var> bound_;
};

}  // namespace msvq

#endif  // MSVQ_PARAMS_HPP_
