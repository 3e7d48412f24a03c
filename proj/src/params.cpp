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

#include "msvq/params.hpp"

#include <cmath>
#include <functional>
#include <random>
#include <stdexcept>

namespace msvq {

void ParamSet::add(const std::string& name, Tensor value) {
  if (!tensors_.emplace(name, std::move(value)).second) {
    throw std::invalid_argument("duplicate parameter name: " + name);
  }
}

Tensor& ParamSet::at(const std::string& name) {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw std::out_of_range("unknown parameter: " + name);
  return it->second;
}

const Tensor& ParamSet::at(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw std::out_of_range("unknown parameter: " + name);
  return it->second;
}

std::size_t ParamSet::element_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : tensors_) n += t.size();
  return n;
}

std::vector<std::string> ParamSet::names() const {
  std::vector<std::string> out;
  out.reserve(tensors_.size());
  for (const auto& [name, t] : tensors_) out.push_back(name);
  return out;
}

ParamSet ParamSet::zeros_like() const {
  ParamSet out;
  for (const auto& [name, t] : tensors_) out.add(name, Tensor(t.dims(), 0.0f));
  return out;
}

void ParamSet::fill(float v) {
  for (auto& [name, t] : tensors_) t.fill(v);
}

bool ParamSet::bit_equal(const ParamSet& other) const {
  if (tensors_.size() != other.tensors_.size()) return false;
  auto a = tensors_.begin();
  auto b = other.tensors_.begin();
  for (; a != tensors_.end(); ++a, ++b) {
    if (a->first != b->first || !a->second.bit_equal(b->second)) return false;
  }
  return true;
}

ParamSet init_params(std::span<const ParamSpec> specs, std::uint64_t seed) {
  ParamSet out;
  for (const ParamSpec& spec : specs) {
    Tensor t(spec.dims, 0.0f);
    if (!spec.is_bias) {
      if (spec.fan_in <= 0) throw std::invalid_argument("non-positive fan_in for " + spec.name);
      // FNV-1a of the name mixed with the seed.
      std::uint64_t h = 1469598103934665603ull ^ seed;
      for (unsigned char c : spec.name) h = (h ^ c) * 1099511628211ull;
      std::mt19937_64 rng(h);
      const float bound = static_cast<float>(std::sqrt(6.0 / spec.fan_in));
      std::uniform_real_distribution<float> dist(-bound, bound);
      for (float& v : t.data()) v = dist(rng);
    }
    out.add(spec.name, std::move(t));
  }
  return out;
}

Var ParamBinding::operator()(const std::string& name) {
  auto it = bound_.find(name);
  if (it != bound_.end()) return it->second;
  Tensor* sink = grads_ ? &grads_->at(name) : nullptr;
  const Var v = graph_.parameter_ref(params_.at(name), sink);
  bound_.emplace(name, v);
  return v;
}

}  // namespace msvq
