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

#include "msvq/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

#include "msvq/conv_kernels.hpp"

namespace msvq {
namespace {

void require_rank(const Tensor& t, int rank, const char* op) {
  if (t.rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                     to_string(t.dims()));
  }
}

std::span<float> grad_span(Graph& g, int id) {
  return g.requires_grad(id) ? g.grad_buffer(id).data() : std::span<float>{};
}

kernels::ConvShape conv_shape(const Tensor& x, const Tensor& w, int stride, int padding) {
  require_rank(x, 4, "conv2d input");
  require_rank(w, 4, "conv2d weight");
  if (w.dim(2) != w.dim(3)) throw ShapeError("conv2d: kernel must be square");
  if (w.dim(1) != x.dim(0)) {
    throw ShapeError("conv2d: weight expects " + std::to_string(w.dim(1)) +
                     " input channels, input has " + std::to_string(x.dim(0)));
  }
  kernels::ConvShape s{x.dim(0), x.dim(1), x.dim(2), w.dim(0), w.dim(2), stride, padding, x.dim(3)};
  s.validate();
  return s;
}

void check_bias(Var bias, int channels, const char* op) {
  if (!bias.valid()) return;
  const Tensor& b = bias.value();
  if (b.size() != static_cast<std::size_t>(channels)) {
    throw ShapeError(std::string(op) + ": bias has " + std::to_string(b.size()) +
                     " entries, expected " + std::to_string(channels));
  }
}

double accumulate(std::span<const float> v) {
  double s = 0.0;
  for (float x : v) s += x;
  return s;
}

}  // namespace

Var conv2d(Var input, Var weight, Var bias, int stride, int padding) {
  Graph& g = input.graph();
  const kernels::ConvShape s = conv_shape(input.value(), weight.value(), stride, padding);
  check_bias(bias, s.out_channels, "conv2d");
  Tensor out({s.out_channels, s.out_height(), s.out_width(), s.batch});
  kernels::conv2d_forward(s, input.value().data(), weight.value().data(),
                          bias.valid() ? bias.value().data() : std::span<const float>{},
                          out.data());
  const int xi = input.id(), wi = weight.id(), bi = bias.valid() ? bias.id() : -1;
  std::vector<Var> inputs{input, weight};
  if (bias.valid()) inputs.push_back(bias);
  return g.record(std::move(out), inputs, [s, xi, wi, bi](Graph& gr, int self) {
    const Tensor& d_out = *gr.incoming_grad(self);
    kernels::conv2d_backward(s, gr.value(xi).data(), gr.value(wi).data(), d_out.data(),
                             grad_span(gr, xi), grad_span(gr, wi),
                             bi >= 0 ? grad_span(gr, bi) : std::span<float>{});
  });
}

Var conv2d_transposed(Var input, Var weight, Var bias, int stride, int padding) {
  Graph& g = input.graph();
  const Tensor& x = input.value();
  const Tensor& w = weight.value();
  require_rank(x, 4, "conv2d_transposed input");
  require_rank(w, 4, "conv2d_transposed weight");
  if (w.dim(2) != w.dim(3)) throw ShapeError("conv2d_transposed: kernel must be square");
  if (w.dim(0) != x.dim(0)) {
    throw ShapeError("conv2d_transposed: weight expects " + std::to_string(w.dim(0)) +
                     " input channels, input has " + std::to_string(x.dim(0)));
  }
  const kernels::TransposedShape s{x.dim(0), x.dim(1), x.dim(2), w.dim(1), w.dim(2), stride,
                                   padding,    x.dim(3)};
  s.validate();
  check_bias(bias, s.out_channels, "conv2d_transposed");
  Tensor out({s.out_channels, s.out_height(), s.out_width(), s.batch});
  kernels::conv2d_transposed_forward(s, x.data(), w.data(),
                                     bias.valid() ? bias.value().data() : std::span<const float>{},
                                     out.data());
  const int xi = input.id(), wi = weight.id(), bi = bias.valid() ? bias.id() : -1;
  std::vector<Var> inputs{input, weight};
  if (bias.valid()) inputs.push_back(bias);
  return g.record(std::move(out), inputs, [s, xi, wi, bi](Graph& gr, int self) {
    const Tensor& d_out = *gr.incoming_grad(self);
    kernels::conv2d_transposed_backward(s, gr.value(xi).data(), gr.value(wi).data(),
                                        d_out.data(), grad_span(gr, xi), grad_span(gr, wi),
                                        bi >= 0 ? grad_span(gr, bi) : std::span<float>{});
  });
}

Var concat_depth(std::initializer_list<Var> inputs) {
  return concat_depth(std::span<const Var>(inputs.begin(), inputs.size()));
}

Var concat_depth(std::span<const Var> inputs) {
  if (inputs.empty()) throw ShapeError("concat_depth: no inputs");
  Graph& g = inputs.front().graph();
  const Tensor& first = inputs.front().value();
  require_rank(first, 4, "concat_depth");
  int channels = 0;
  for (const Var& v : inputs) {
    const Tensor& t = v.value();
    require_rank(t, 4, "concat_depth");
    if (t.dim(1) != first.dim(1) || t.dim(2) != first.dim(2) || t.dim(3) != first.dim(3)) {
      throw ShapeError("concat_depth: spatial mismatch " + to_string(first.dims()) + " vs " +
                       to_string(t.dims()));
    }
    channels += t.dim(0);
  }
  Tensor out({channels, first.dim(1), first.dim(2), first.dim(3)});
  std::size_t offset = 0;
  std::vector<int> ids;
  for (const Var& v : inputs) {
    const Tensor& t = v.value();
    std::copy(t.data().begin(), t.data().end(), out.data().begin() + offset);
    offset += t.size();
    ids.push_back(v.id());
  }
  return g.record(std::move(out), std::vector<Var>(inputs.begin(), inputs.end()),
                  [ids](Graph& gr, int self) {
                    const Tensor& d_out = *gr.incoming_grad(self);
                    std::size_t off = 0;
                    for (int id : ids) {
                      const std::size_t n = gr.value(id).size();
                      if (gr.requires_grad(id)) {
                        Tensor& d = gr.grad_buffer(id);
                        for (std::size_t i = 0; i < n; ++i) d[i] += d_out[off + i];
                      }
                      off += n;
                    }
                  });
}

Var activation(Var input, Activation kind) {
  Graph& g = input.graph();
  const Tensor& x = input.value();
  Tensor out(x.dims());
  const std::size_t n = x.size();
  switch (kind) {
    case Activation::kRelu:
      for (std::size_t i = 0; i < n; ++i) out[i] = x[i] > 0.0f ? x[i] : 0.0f;
      break;
    case Activation::kSigmoid:
      for (std::size_t i = 0; i < n; ++i) out[i] = 1.0f / (1.0f + std::exp(-x[i]));
      break;
    case Activation::kLinear:
      out = x;
      break;
  }
  const int xi = input.id();
  return g.record(std::move(out), {input}, [kind, xi](Graph& gr, int self) {
    if (!gr.requires_grad(xi)) return;
    const Tensor& d_out = *gr.incoming_grad(self);
    const Tensor& y = gr.value(self);
    Tensor& d = gr.grad_buffer(xi);
    const std::size_t n = y.size();
    switch (kind) {
      case Activation::kRelu:
        // y > 0 exactly when x > 0, so the subgradient at 0 is 0.
        for (std::size_t i = 0; i < n; ++i) d[i] += y[i] > 0.0f ? d_out[i] : 0.0f;
        break;
      case Activation::kSigmoid:
        for (std::size_t i = 0; i < n; ++i) d[i] += d_out[i] * y[i] * (1.0f - y[i]);
        break;
      case Activation::kLinear:
        for (std::size_t i = 0; i < n; ++i) d[i] += d_out[i];
        break;
    }
  });
}

Var add(Var a, Var b) {
  Graph& g = a.graph();
  require_same_dims(a.value(), b.value(), "add");
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  const int ai = a.id(), bi = b.id();
  return g.record(std::move(out), {a, b}, [ai, bi](Graph& gr, int self) {
    const Tensor& d_out = *gr.incoming_grad(self);
    for (int id : {ai, bi}) {
      if (!gr.requires_grad(id)) continue;
      Tensor& d = gr.grad_buffer(id);
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += d_out[i];
    }
  });
}

Var sub(Var a, Var b) {
  Graph& g = a.graph();
  require_same_dims(a.value(), b.value(), "sub");
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  const int ai = a.id(), bi = b.id();
  return g.record(std::move(out), {a, b}, [ai, bi](Graph& gr, int self) {
    const Tensor& d_out = *gr.incoming_grad(self);
    if (gr.requires_grad(ai)) {
      Tensor& d = gr.grad_buffer(ai);
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += d_out[i];
    }
    if (gr.requires_grad(bi)) {
      Tensor& d = gr.grad_buffer(bi);
      for (std::size_t i = 0; i < d.size(); ++i) d[i] -= d_out[i];
    }
  });
}

Var mul(Var a, Var b) {
  Graph& g = a.graph();
  require_same_dims(a.value(), b.value(), "mul");
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  const int ai = a.id(), bi = b.id();
  return g.record(std::move(out), {a, b}, [ai, bi](Graph& gr, int self) {
    const Tensor& d_out = *gr.incoming_grad(self);
    if (gr.requires_grad(ai)) {
      Tensor& d = gr.grad_buffer(ai);
      const Tensor& other = gr.value(bi);
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += d_out[i] * other[i];
    }
    if (gr.requires_grad(bi)) {
      Tensor& d = gr.grad_buffer(bi);
      const Tensor& other = gr.value(ai);
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += d_out[i] * other[i];
    }
  });
}

Var scale(Var a, float factor) {
  Graph& g = a.graph();
  Tensor out = a.value();
  for (float& v : out.data()) v *= factor;
  const int ai = a.id();
  return g.record(std::move(out), {a}, [ai, factor](Graph& gr, int self) {
    if (!gr.requires_grad(ai)) return;
    const Tensor& d_out = *gr.incoming_grad(self);
    Tensor& d = gr.grad_buffer(ai);
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += factor * d_out[i];
  });
}

Var stop_gradient(Var x) { return x.graph().constant(x.value()); }

Var straight_through(Var continuous, Var quantized) {
  Graph& g = continuous.graph();
  require_same_dims(continuous.value(), quantized.value(), "straight_through");
  const int ci = continuous.id();
  return g.record(quantized.value(), {continuous}, [ci](Graph& gr, int self) {
    if (!gr.requires_grad(ci)) return;
    const Tensor& d_out = *gr.incoming_grad(self);
    Tensor& d = gr.grad_buffer(ci);
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += d_out[i];
  });
}

Var sum(Var x) {
  Graph& g = x.graph();
  const int xi = x.id();
  return g.record(Tensor::scalar(static_cast<float>(accumulate(x.value().data()))), {x},
                  [xi](Graph& gr, int self) {
                    if (!gr.requires_grad(xi)) return;
                    const float d_out = (*gr.incoming_grad(self))[0];
                    Tensor& d = gr.grad_buffer(xi);
                    for (float& v : d.data()) v += d_out;
                  });
}

Var mean(Var x) {
  Graph& g = x.graph();
  const int xi = x.id();
  const double n = static_cast<double>(x.value().size());
  return g.record(Tensor::scalar(static_cast<float>(accumulate(x.value().data()) / n)), {x},
                  [xi, n](Graph& gr, int self) {
                    if (!gr.requires_grad(xi)) return;
                    const float d_out = static_cast<float>((*gr.incoming_grad(self))[0] / n);
                    Tensor& d = gr.grad_buffer(xi);
                    for (float& v : d.data()) v += d_out;
                  });
}

Var mse(Var a, Var b) {
  Graph& g = a.graph();
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_same_dims(av, bv, "mse");
  double acc = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) {
    const double diff = static_cast<double>(av[i]) - bv[i];
    acc += diff * diff;
  }
  const double n = static_cast<double>(av.size());
  const int ai = a.id(), bi = b.id();
  return g.record(Tensor::scalar(static_cast<float>(acc / n)), {a, b},
                  [ai, bi, n](Graph& gr, int self) {
                    const float k = static_cast<float>(2.0 * (*gr.incoming_grad(self))[0] / n);
                    const Tensor& av = gr.value(ai);
                    const Tensor& bv = gr.value(bi);
                    if (gr.requires_grad(ai)) {
                      Tensor& d = gr.grad_buffer(ai);
                      for (std::size_t i = 0; i < d.size(); ++i) d[i] += k * (av[i] - bv[i]);
                    }
                    if (gr.requires_grad(bi)) {
                      Tensor& d = gr.grad_buffer(bi);
                      for (std::size_t i = 0; i < d.size(); ++i) d[i] -= k * (av[i] - bv[i]);
                    }
                  });
}

Var max_pool2(Var x) {
  Graph& g = x.graph();
  const Tensor& in = x.value();
  require_rank(in, 4, "max_pool2");
  const int c = in.dim(0), h = in.dim(1), w = in.dim(2), n = in.dim(3);
  if (h % 2 || w % 2) throw ShapeError("max_pool2: odd spatial extent " + to_string(in.dims()));
  Tensor out({c, h / 2, w / 2, n});
  std::vector<std::size_t> argmax(out.size());
  const auto at = [&](int ch, int y, int xx) {
    return ((static_cast<std::size_t>(ch) * h + y) * w + xx) * n;
  };
  std::size_t o = 0;
  for (int ch = 0; ch < c; ++ch) {
    for (int y = 0; y < h / 2; ++y) {
      for (int xx = 0; xx < w / 2; ++xx) {
        for (int b = 0; b < n; ++b, ++o) {
          std::size_t best = at(ch, 2 * y, 2 * xx) + b;
          for (int dy = 0; dy < 2; ++dy) {
            for (int dx = 0; dx < 2; ++dx) {
              const std::size_t idx = at(ch, 2 * y + dy, 2 * xx + dx) + b;
              if (in[idx] > in[best]) best = idx;
            }
          }
          out[o] = in[best];
          argmax[o] = best;
        }
      }
    }
  }
  const int xi = x.id();
  return g.record(std::move(out), {x}, [xi, argmax = std::move(argmax)](Graph& gr, int self) {
    if (!gr.requires_grad(xi)) return;
    const Tensor& d_out = *gr.incoming_grad(self);
    Tensor& d = gr.grad_buffer(xi);
    for (std::size_t i = 0; i < argmax.size(); ++i) d[argmax[i]] += d_out[i];
  });
}

Var global_avg_pool(Var x) {
  Graph& g = x.graph();
  const Tensor& in = x.value();
  require_rank(in, 4, "global_avg_pool");
  const int c = in.dim(0), n = in.dim(3);
  const std::size_t plane = static_cast<std::size_t>(in.dim(1)) * in.dim(2);
  Tensor out({c, n});
  for (int ch = 0; ch < c; ++ch) {
    for (int b = 0; b < n; ++b) {
      double acc = 0.0;
      const std::size_t base = static_cast<std::size_t>(ch) * plane * n + b;
      for (std::size_t q = 0; q < plane; ++q) acc += in[base + q * n];
      out[static_cast<std::size_t>(ch) * n + b] = static_cast<float>(acc / plane);
    }
  }
  const int xi = x.id();
  return g.record(std::move(out), {x}, [xi, plane, n](Graph& gr, int self) {
    if (!gr.requires_grad(xi)) return;
    const Tensor& d_out = *gr.incoming_grad(self);
    Tensor& d = gr.grad_buffer(xi);
    const float inv = 1.0f / static_cast<float>(plane);
    const std::size_t un = static_cast<std::size_t>(n);
    for (std::size_t i = 0; i < d.size(); ++i) {
      d[i] += d_out[(i / (plane * un)) * un + i % un] * inv;
    }
  });
}

Var linear(Var input, Var weight, Var bias) {
  Graph& g = input.graph();
  const Tensor& x = input.value();
  const Tensor& w = weight.value();
  require_rank(w, 2, "linear weight");
  require_rank(x, 2, "linear input");
  const int m = w.dim(0), k = w.dim(1), n = x.dim(1);
  if (x.dim(0) != k) {
    throw ShapeError("linear: input has " + std::to_string(x.dim(0)) + " features, weight expects " +
                     std::to_string(k));
  }
  check_bias(bias, m, "linear");
  Tensor out({m, n});
  for (int i = 0; i < m; ++i) {
    for (int b = 0; b < n; ++b) {
      double acc = bias.valid() ? bias.value()[i] : 0.0;
      for (int j = 0; j < k; ++j) {
        acc += static_cast<double>(w[static_cast<std::size_t>(i) * k + j]) *
               x[static_cast<std::size_t>(j) * n + b];
      }
      out[static_cast<std::size_t>(i) * n + b] = static_cast<float>(acc);
    }
  }
  const int xi = input.id(), wi = weight.id(), bi = bias.valid() ? bias.id() : -1;
  std::vector<Var> inputs{input, weight};
  if (bias.valid()) inputs.push_back(bias);
  return g.record(std::move(out), inputs, [xi, wi, bi, m, k, n](Graph& gr, int self) {
    const Tensor& d_out = *gr.incoming_grad(self);
    const Tensor& xv = gr.value(xi);
    const Tensor& wv = gr.value(wi);
    const auto at = [](int r, int c, int cols) { return static_cast<std::size_t>(r) * cols + c; };
    if (gr.requires_grad(xi)) {
      Tensor& d = gr.grad_buffer(xi);
      for (int i = 0; i < m; ++i) {
        for (int j = 0; j < k; ++j) {
          for (int b = 0; b < n; ++b) d[at(j, b, n)] += d_out[at(i, b, n)] * wv[at(i, j, k)];
        }
      }
    }
    if (gr.requires_grad(wi)) {
      Tensor& d = gr.grad_buffer(wi);
      for (int i = 0; i < m; ++i) {
        for (int j = 0; j < k; ++j) {
          double acc = 0.0;
          for (int b = 0; b < n; ++b) acc += static_cast<double>(d_out[at(i, b, n)]) * xv[at(j, b, n)];
          d[at(i, j, k)] += static_cast<float>(acc);
        }
      }
    }
    if (bi >= 0 && gr.requires_grad(bi)) {
      Tensor& d = gr.grad_buffer(bi);
      for (int i = 0; i < m; ++i) {
        double acc = 0.0;
        for (int b = 0; b < n; ++b) acc += d_out[at(i, b, n)];
        d[i] += static_cast<float>(acc);
      }
    }
  });
}

Var bce_with_logits(Var logits, std::span<const float> targets) {
  Graph& g = logits.graph();
  const Tensor& z = logits.value();
  if (z.size() != targets.size() || targets.empty()) {
    throw ShapeError("bce_with_logits: " + std::to_string(z.size()) + " logits for " +
                     std::to_string(targets.size()) + " targets");
  }
  const std::vector<float> t(targets.begin(), targets.end());
  double loss = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double v = z[i];
    // max(z, 0) - z*t + log(1 + exp(-|z|))
    loss += std::max(v, 0.0) - v * t[i] + std::log1p(std::exp(-std::abs(v)));
  }
  const double count = static_cast<double>(z.size());
  const int li = logits.id();
  return g.record(Tensor::scalar(static_cast<float>(loss / count)), {logits},
                  [li, t, count](Graph& gr, int self) {
                    if (!gr.requires_grad(li)) return;
                    const double scale = (*gr.incoming_grad(self))[0] / count;
                    const Tensor& zv = gr.value(li);
                    Tensor& d = gr.grad_buffer(li);
                    for (std::size_t i = 0; i < t.size(); ++i) {
                      const double p = 1.0 / (1.0 + std::exp(-static_cast<double>(zv[i])));
                      d[i] += static_cast<float>(scale * (p - t[i]));
                    }
                  });
}

}  // namespace msvq
