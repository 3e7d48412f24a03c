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

#include "msvq/gradcheck_suite.hpp"

#include <algorithm>
#include <random>

#include "msvq/model.hpp"
#include "msvq/msb.hpp"
#include "msvq/ops.hpp"
#include "msvq/reference.hpp"

namespace msvq {
namespace {

namespace ref = msvq::reference;

Tensor uniform(Shape dims, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(std::move(dims));
  for (float& v : t.data()) v = static_cast<float>(u(rng));
  return t;
}

ref::Map to_map(std::span<const double> v, const Tensor& like) {
  ref::Map m(like.dim(0), like.dim(1), like.dim(2));
  std::copy(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(m.values.size()), m.values.begin());
  return m;
}

double project(const ref::Map& m, const Tensor& r) {
  double acc = 0.0;
  for (std::size_t i = 0; i < m.values.size(); ++i) acc += m.values[i] * r[i];
  return acc;
}

// A flat point made of named tensors, in insertion order.
class Point {
 public:
  void append(const std::string& name, const Tensor& t) {
    offsets_.push_back({name, values_.size()});
    sizes_.push_back(t.size());
    values_.insert(values_.end(), t.data().begin(), t.data().end());
  }
  std::span<const double> values() const { return values_; }

  ref::Params params(std::span<const double> at, const ref::Params& base = {}) const {
    ref::Params out = base;
    for (std::size_t i = 0; i < offsets_.size(); ++i) {
      auto first = at.begin() + static_cast<std::ptrdiff_t>(offsets_[i].second);
      out[offsets_[i].first].assign(first, first + static_cast<std::ptrdiff_t>(sizes_[i]));
    }
    return out;
  }

 private:
  std::vector<std::pair<std::string, std::size_t>> offsets_;
  std::vector<std::size_t> sizes_;
  std::vector<double> values_;
};

ref::Params to_reference(const ParamSet& params) {
  ref::Params out;
  for (const auto& [name, t] : params) out[name].assign(t.data().begin(), t.data().end());
  return out;
}

void keep_worst(GradCheckReport& worst, const GradCheckReport& r) {
  const std::size_t checked = worst.checked + r.checked;
  const std::size_t skipped = worst.skipped + r.skipped;
  if (worst.checked == 0 || r.max_rel_error > worst.max_rel_error) worst = r;
  worst.checked = checked;
  worst.skipped = skipped;
}

Tensor batch_of_one(const Tensor& t) {
  Tensor b = t;
  b.reshape({t.dim(0), t.dim(1), t.dim(2), 1});
  return b;
}

GradCheckReport check_conv(bool transposed, int in_c, int out_c, int size, int k, int stride,
                           int pad, std::uint64_t seed, std::size_t coords) {
  std::mt19937_64 rng(seed);
  const Tensor x = uniform({in_c, size, size}, rng);
  const Tensor w = transposed ? uniform({in_c, out_c, k, k}, rng) : uniform({out_c, in_c, k, k}, rng);
  const Tensor b = uniform({out_c}, rng);

  Graph g;
  const Var xv = g.parameter(batch_of_one(x)), wv = g.parameter(w), bv = g.parameter(b);
  const Var y = transposed ? conv2d_transposed(xv, wv, bv, stride, pad)
                           : conv2d(xv, wv, bv, stride, pad);
  const Tensor r = uniform(y.value().dims(), rng);
  g.backward(sum(mul(y, g.constant(r))));
  std::vector<float> analytic;
  for (Var v : {xv, wv, bv}) {
    const Tensor& gr = g.grad(v);
    analytic.insert(analytic.end(), gr.data().begin(), gr.data().end());
  }

  Point point;
  point.append("x", x);
  point.append("w", w);
  point.append("b", b);
  const auto fn = [&](std::span<const double> at) {
    const ref::Params p = point.params(at);
    const ref::Map in = to_map(p.at("x"), x);
    ref::Map out = transposed ? ref::conv2d_transposed(in, p.at("w"), p.at("b"), stride, pad)
                              : ref::conv2d(in, p.at("w"), p.at("b"), stride, pad);
    return PiecewiseValue{project(out, r), {}};
  };
  return reference_check(analytic, fn, point.values(), kGradcheckEps, coords, seed + 1);
}

GradCheckReport check_block(bool residual, int channels, int size, std::uint64_t seed,
                            std::size_t coords) {
  std::mt19937_64 rng(seed);
  std::vector<ParamSpec> specs;
  if (residual) {
    describe_residual_msb(specs, "blk", channels);
  } else {
    describe_msb(specs, "blk", channels);
  }
  const ParamSet params = init_params(specs, seed);
  const Tensor x = uniform({channels, size, size}, rng);

  Graph g;
  ParamSet grads = params.zeros_like();
  ParamBinding p(g, params, &grads);
  const Var xv = g.parameter(batch_of_one(x));
  const Var y = residual ? residual_msb_forward(p, "blk", xv) : msb_forward(p, "blk", xv);
  const Tensor r = uniform(y.value().dims(), rng);
  g.backward(sum(mul(y, g.constant(r))));

  Point point;
  point.append("x", x);
  std::vector<float> analytic(g.grad(xv).data().begin(), g.grad(xv).data().end());
  for (const auto& [name, t] : params) {
    point.append(name, t);
    analytic.insert(analytic.end(), grads.at(name).data().begin(), grads.at(name).data().end());
  }
  const auto fn = [&](std::span<const double> at) {
    const ref::Params rp = point.params(at);
    ref::Trace trace;
    const ref::Map in = to_map(rp.at("x"), x);
    const ref::Map out = residual ? ref::residual_msb(rp, "blk", in, &trace)
                                  : ref::msb(rp, "blk", in, &trace);
    return PiecewiseValue{project(out, r), std::move(trace.decisions)};
  };
  return reference_check(analytic, fn, point.values(), kGradcheckEps, coords, seed + 1);
}

ModelConfig small_model() {
  ModelConfig c;
  c.image_size = 16;
  c.base_channels = 4;
  c.stages = 2;
  c.codebook_size = 8;
  c.embedding_dim = 4;
  return c;
}

enum class ModelLoss { kContinuous, kThroughQuantizer, kCommitment };

GradCheckReport check_model(ModelLoss which, std::uint64_t seed, std::size_t coords) {
  const ModelConfig c = small_model();
  const Model model = make_model(c, seed);
  std::mt19937_64 rng(seed);
  const Tensor x = uniform({3, c.image_size, c.image_size}, rng);
  const std::vector<double> codebook(model.codebook.data().begin(), model.codebook.data().end());

  Graph g;
  ParamSet grads = model.params.zeros_like();
  ParamBinding p(g, model.params, &grads);
  const Var xv = g.constant(batch_of_one(x));
  const Var z_e = encode(p, c, xv);
  Var loss;
  if (which == ModelLoss::kContinuous) {
    const Var d = sub(decode(p, c, z_e), xv);
    loss = sum(mul(d, d));
  } else {
    const Var z_q = g.constant(quantize(z_e.value(), model.codebook).values);
    if (which == ModelLoss::kThroughQuantizer) {
      const Var d = sub(decode(p, c, straight_through(z_e, z_q)), xv);
      loss = sum(mul(d, d));
    } else {
      const Var d = sub(z_e, stop_gradient(z_q));
      loss = scale(sum(mul(d, d)), static_cast<float>(c.beta));
    }
  }
  g.backward(loss);

  // Decoder parameters through the quantizer; encoder parameters for the
  // commitment term; everything for the continuous composition.
  const auto selected = [&](const std::string& name) {
    if (which == ModelLoss::kThroughQuantizer) return name.rfind("dec.", 0) == 0;
    if (which == ModelLoss::kCommitment) return name.rfind("enc.", 0) == 0;
    return true;
  };
  Point point;
  std::vector<float> analytic;
  for (const auto& [name, t] : model.params) {
    if (!selected(name)) continue;
    point.append(name, t);
    analytic.insert(analytic.end(), grads.at(name).data().begin(), grads.at(name).data().end());
  }
  const ref::Params base = to_reference(model.params);
  ref::Map image(3, c.image_size, c.image_size);
  image.values.assign(x.data().begin(), x.data().end());

  const auto fn = [&](std::span<const double> at) {
    const ref::Params rp = point.params(at, base);
    ref::Trace trace;
    const ref::Map z = ref::encode(rp, c, image, &trace);
    double value = 0.0;
    if (which == ModelLoss::kCommitment) {
      const ref::Map q = ref::quantize(z, codebook, &trace);
      for (std::size_t i = 0; i < z.values.size(); ++i) {
        value += (z.values[i] - q.values[i]) * (z.values[i] - q.values[i]);
      }
      value *= c.beta;
    } else {
      const ref::Map in = which == ModelLoss::kContinuous ? z : ref::quantize(z, codebook, &trace);
      const ref::Map out = ref::decode(rp, c, in, &trace);
      for (std::size_t i = 0; i < out.values.size(); ++i) {
        value += (out.values[i] - image.values[i]) * (out.values[i] - image.values[i]);
      }
    }
    return PiecewiseValue{value, std::move(trace.decisions)};
  };
  return reference_check(analytic, fn, point.values(), kGradcheckEps, coords, seed + 1);
}

}  // namespace

std::vector<FamilyCheck> run_gradcheck_suite(std::uint64_t seed, std::size_t coords) {
  std::vector<FamilyCheck> out;

  FamilyCheck conv{"conv2d", {}};
  keep_worst(conv.report, check_conv(false, 3, 4, 7, 3, 1, 1, seed, coords));
  keep_worst(conv.report, check_conv(false, 3, 4, 7, 3, 2, 1, seed + 10, coords));
  keep_worst(conv.report, check_conv(false, 4, 3, 6, 1, 1, 0, seed + 20, coords));
  keep_worst(conv.report, check_conv(false, 2, 3, 8, 7, 1, 3, seed + 30, coords));
  out.push_back(conv);

  FamilyCheck up{"conv2d_transposed", {}};
  keep_worst(up.report, check_conv(true, 3, 2, 4, 4, 2, 1, seed + 40, coords));
  keep_worst(up.report, check_conv(true, 2, 3, 5, 3, 1, 1, seed + 50, coords));
  out.push_back(up);

  out.push_back({"msb", check_block(false, 3, 6, seed + 60, coords)});
  out.push_back({"residual_msb", check_block(true, 3, 6, seed + 70, coords)});
  out.push_back({"encoder_decoder", check_model(ModelLoss::kContinuous, seed + 80, coords)});
  out.push_back({"decoder_through_quantizer",
                 check_model(ModelLoss::kThroughQuantizer, seed + 90, coords)});
  out.push_back({"commitment", check_model(ModelLoss::kCommitment, seed + 100, coords)});
  return out;
}

}  // namespace msvq
