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

#include "msvq/conv_kernels.hpp"

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "msvq/tensor.hpp"

// Three register-blocked primitives cover every layer:
//
//   direct      out[o][y][x] = b[o] + sum_{c,ky,kx} w(o,c,ky,kx) in[c][y*s+ky-p][x*s+kx-p]
//   upgather    out[o][y][x] = b[o] + sum over (c,ky,kx) with y+p-ky and x+p-kx divisible
//               by s of w(o,c,ky,kx) in[c][(y+p-ky)/s][(x+p-kx)/s]
//   weight_grad dw[o][c][ky][kx] += sum_{y,x} d_out[o][y][x] . in[c][y*s+ky-p][x*s+kx-p]
//
// Each "pixel" is a vector of 16 images. Batches are processed one lane group
// at a time; a group is copied into scratch (zero-padded along x where the
// kernel needs it) unless it can be read in place. Taps whose rows fall
// outside the image are skipped rather than multiplied by zero.

namespace msvq::kernels {
namespace {

constexpr int kLanes = 16;
using vf = float __attribute__((vector_size(kLanes * sizeof(float))));
using vf_unaligned = float __attribute__((vector_size(kLanes * sizeof(float)), aligned(4), may_alias));

inline vf load(const float* p) { return *reinterpret_cast<const vf_unaligned*>(p); }
inline void store(float* p, vf v) { *reinterpret_cast<vf_unaligned*>(p) = v; }

inline float hsum(vf v) {
  float s = 0.0f;
  for (int i = 0; i < kLanes; ++i) s += v[i];
  return s;
}

inline std::size_t sz(int v) { return static_cast<std::size_t>(v); }

enum Slot { kInput, kGrad, kOut, kPacked, kZero, kSlotCount };

// Thread-local, cache-line aligned, grown on demand.
float* scratch(Slot slot, std::size_t n) {
  thread_local std::array<std::vector<float>, kSlotCount> pool;
  auto& buf = pool[slot];
  if (buf.size() < n + kLanes) buf.resize(n + kLanes);
  const auto addr = reinterpret_cast<std::uintptr_t>(buf.data());
  const std::uintptr_t aligned = (addr + 63) & ~static_cast<std::uintptr_t>(63);
  return buf.data() + (aligned - addr) / sizeof(float);
}

const float* zeros(std::size_t n) {
  float* z = scratch(kZero, n);
  std::fill(z, z + n, 0.0f);
  return z;
}

int group_count(int batch) { return (batch + kLanes - 1) / kLanes; }

// Copies lane group g of a [C][H][W][N] array into [C][H][W + 2*pad][16],
// zero-filling the pad columns and missing lanes. Returns the source itself
// when it already has that layout.
const float* load_group(const float* src, int batch, int g, int channels, int h, int w, int pad,
                        Slot slot) {
  if (batch == kLanes && pad == 0) return src;
  const int wp = w + 2 * pad;
  const int lanes = std::min(kLanes, batch - g * kLanes);
  float* buf = scratch(slot, sz(channels) * h * wp * kLanes);
  for (int c = 0; c < channels; ++c) {
    for (int y = 0; y < h; ++y) {
      float* row = buf + (sz(c) * h + y) * wp * kLanes;
      std::fill(row, row + sz(pad) * kLanes, 0.0f);
      std::fill(row + sz(pad + w) * kLanes, row + sz(wp) * kLanes, 0.0f);
      const float* s = src + (sz(c) * h + y) * w * batch + sz(g) * kLanes;
      float* d = row + sz(pad) * kLanes;
      for (int x = 0; x < w; ++x, s += batch, d += kLanes) {
        std::memcpy(d, s, sz(lanes) * sizeof(float));
        if (lanes < kLanes) std::fill(d + lanes, d + kLanes, 0.0f);
      }
    }
  }
  return buf;
}

// Output buffer for one lane group, or the destination itself when the
// result can be written (or accumulated) in place.
float* group_output(float* dst, int batch, std::size_t positions) {
  if (batch == kLanes) return dst;
  return scratch(kOut, positions * kLanes);
}

void store_group(const float* buf, std::size_t positions, float* dst, int batch, int g,
                 bool accumulate) {
  if (buf == dst) return;
  const int lanes = std::min(kLanes, batch - g * kLanes);
  float* d = dst + sz(g) * kLanes;
  for (std::size_t q = 0; q < positions; ++q, d += batch, buf += kLanes) {
    if (accumulate) {
      for (int l = 0; l < lanes; ++l) d[l] += buf[l];
    } else {
      std::memcpy(d, buf, sz(lanes) * sizeof(float));
    }
  }
}

// ---------------------------------------------------------------------------
// direct

struct DirectGeom {
  int channels, h, w, k, stride, pad, oh, ow, outputs;
  int wp() const { return w + 2 * pad; }
};

// Packs w(o, c, ky, kx) as [block][c][ky][kx][CB], zero beyond `outputs`.
template <int CB, typename W>
const float* pack_direct(const DirectGeom& g, W weight) {
  const int blocks = (g.outputs + CB - 1) / CB;
  const std::size_t per_block = sz(g.channels) * g.k * g.k * CB;
  float* p = scratch(kPacked, per_block * blocks);
  for (int b = 0; b < blocks; ++b) {
    float* dst = p + per_block * b;
    for (int c = 0; c < g.channels; ++c) {
      for (int ky = 0; ky < g.k; ++ky) {
        for (int kx = 0; kx < g.k; ++kx, dst += CB) {
          #pragma GCC unroll 32
          for (int j = 0; j < CB; ++j) {
            const int o = b * CB + j;
            dst[j] = o < g.outputs ? weight(o, c, ky, kx) : 0.0f;
          }
        }
      }
    }
  }
  return p;
}

template <int CB, int X>
inline void direct_tile(const DirectGeom& g, const float* in, const float* wpack,
                        const float* bias, int valid, float* out, bool add, int y, int x0) {
  const int s = g.stride, k = g.k, wp = g.wp();
  const std::size_t plane = sz(g.oh) * g.ow * kLanes;
  vf acc[CB][X];
  #pragma GCC unroll 32
  for (int cb = 0; cb < CB; ++cb) {
    const float b = (bias && cb < valid) ? bias[cb] : 0.0f;
    #pragma GCC unroll 32
    for (int xi = 0; xi < X; ++xi) acc[cb][xi] = vf{} + b;
  }
  const int iy0 = y * s - g.pad;
  const int ky_lo = std::max(0, -iy0);
  const int ky_hi = std::min(k, g.h - iy0);
  const int kx_lo = std::max(0, g.pad - (x0 + X - 1) * s);
  const int kx_hi = std::min(k, g.w + g.pad - x0 * s);
  for (int c = 0; c < g.channels; ++c) {
    const float* in_c = in + sz(c) * g.h * wp * kLanes;
    const float* w_c = wpack + sz(c) * k * k * CB;
    for (int ky = ky_lo; ky < ky_hi; ++ky) {
      const float* row = in_c + (sz(iy0 + ky) * wp + sz(x0) * s) * kLanes;
      const float* wr = w_c + sz(ky) * k * CB;
      for (int kx = kx_lo; kx < kx_hi; ++kx) {
        vf xv[X];
        #pragma GCC unroll 32
        for (int xi = 0; xi < X; ++xi) xv[xi] = load(row + (sz(xi) * s + kx) * kLanes);
        const float* wv = wr + sz(kx) * CB;
        #pragma GCC unroll 32
        for (int cb = 0; cb < CB; ++cb) {
          const float wc = wv[cb];
          #pragma GCC unroll 32
          for (int xi = 0; xi < X; ++xi) acc[cb][xi] += wc * xv[xi];
        }
      }
    }
  }
  #pragma GCC unroll 32
  for (int cb = 0; cb < CB; ++cb) {
    if (cb >= valid) break;
    float* o = out + cb * plane + (sz(y) * g.ow + x0) * kLanes;
    #pragma GCC unroll 32
    for (int xi = 0; xi < X; ++xi) {
      float* dst = o + sz(xi) * kLanes;
      store(dst, add ? load(dst) + acc[cb][xi] : acc[cb][xi]);
    }
  }
}

template <int CB, int X>
void direct_group(const DirectGeom& g, const float* in, const float* wpack, const float* bias,
                  float* out, bool add) {
  const std::size_t per_block = sz(g.channels) * g.k * g.k * CB;
  const std::size_t plane = sz(g.oh) * g.ow * kLanes;
  for (int o0 = 0, b = 0; o0 < g.outputs; o0 += CB, ++b) {
    const int valid = std::min(CB, g.outputs - o0);
    const float* wb = wpack + per_block * b;
    const float* bb = bias ? bias + o0 : nullptr;
    float* ob = out + plane * o0;
    for (int y = 0; y < g.oh; ++y) {
      int x0 = 0;
      for (; x0 + X <= g.ow; x0 += X) direct_tile<CB, X>(g, in, wb, bb, valid, ob, add, y, x0);
      if constexpr (X > 2) {
        if (x0 + 2 <= g.ow) {
          direct_tile<CB, 2>(g, in, wb, bb, valid, ob, add, y, x0);
          x0 += 2;
        }
      }
      for (; x0 < g.ow; ++x0) direct_tile<CB, 1>(g, in, wb, bb, valid, ob, add, y, x0);
    }
  }
}

template <typename W>
void direct(const DirectGeom& g, const float* src, int batch, W weight, const float* bias,
            float* dst, bool accumulate) {
  const bool wide = g.ow >= 8;
  const float* wpack = wide ? pack_direct<8>(g, weight) : pack_direct<16>(g, weight);
  const std::size_t positions = sz(g.oh) * g.ow;
  for (int grp = 0; grp < group_count(batch); ++grp) {
    const float* in = load_group(src, batch, grp, g.channels, g.h, g.w, g.pad, kInput);
    float* out = group_output(dst, batch, positions * g.outputs);
    const bool add = accumulate && out == dst;
    if (wide) {
      direct_group<8, 3>(g, in, wpack, bias, out, add);
    } else {
      direct_group<16, 1>(g, in, wpack, bias, out, add);
    }
    store_group(out, positions * g.outputs, dst, batch, grp, accumulate);
  }
}

// ---------------------------------------------------------------------------
// upgather

struct UpGeom {
  int channels, h, w, k, stride, pad, oh, ow, outputs;
};

// Packs w(o, c, ky, kx) as [block][ky][kx][c][CB].
template <int CB, typename W>
const float* pack_up(const UpGeom& g, W weight) {
  const int blocks = (g.outputs + CB - 1) / CB;
  const std::size_t per_block = sz(g.channels) * g.k * g.k * CB;
  float* p = scratch(kPacked, per_block * blocks);
  for (int b = 0; b < blocks; ++b) {
    float* dst = p + per_block * b;
    for (int ky = 0; ky < g.k; ++ky) {
      for (int kx = 0; kx < g.k; ++kx) {
        for (int c = 0; c < g.channels; ++c, dst += CB) {
          #pragma GCC unroll 32
          for (int j = 0; j < CB; ++j) {
            const int o = b * CB + j;
            dst[j] = o < g.outputs ? weight(o, c, ky, kx) : 0.0f;
          }
        }
      }
    }
  }
  return p;
}

template <int CB>
void up_group(const UpGeom& g, const float* in, const float* wpack, const float* bias,
              float* out, bool add) {
  const int s = g.stride, k = g.k;
  const std::size_t per_block = sz(g.channels) * k * k * CB;
  const std::size_t in_plane = sz(g.h) * g.w * kLanes;
  const std::size_t out_plane = sz(g.oh) * g.ow * kLanes;
  for (int o0 = 0, b = 0; o0 < g.outputs; o0 += CB, ++b) {
    const int valid = std::min(CB, g.outputs - o0);
    const float* wb = wpack + per_block * b;
    for (int y = 0; y < g.oh; ++y) {
      for (int x = 0; x < g.ow; ++x) {
        vf acc[CB];
        #pragma GCC unroll 32
        for (int cb = 0; cb < CB; ++cb) {
          acc[cb] = vf{} + ((bias && cb < valid) ? bias[o0 + cb] : 0.0f);
        }
        for (int ky = (y + g.pad) % s; ky < k; ky += s) {
          const int iy = (y + g.pad - ky) / s;
          if (iy < 0) break;
          if (iy >= g.h) continue;
          for (int kx = (x + g.pad) % s; kx < k; kx += s) {
            const int ix = (x + g.pad - kx) / s;
            if (ix < 0) break;
            if (ix >= g.w) continue;
            const float* src = in + (sz(iy) * g.w + ix) * kLanes;
            const float* wv = wb + (sz(ky) * k + kx) * g.channels * CB;
            for (int c = 0; c < g.channels; ++c, src += in_plane, wv += CB) {
              const vf xv = load(src);
              #pragma GCC unroll 32
              for (int cb = 0; cb < CB; ++cb) acc[cb] += wv[cb] * xv;
            }
          }
        }
        float* o = out + sz(o0) * out_plane + (sz(y) * g.ow + x) * kLanes;
        #pragma GCC unroll 32
        for (int cb = 0; cb < CB; ++cb) {
          if (cb < valid) {
            float* dst = o + cb * out_plane;
            store(dst, add ? load(dst) + acc[cb] : acc[cb]);
          }
        }
      }
    }
  }
}

template <typename W>
void upgather(const UpGeom& g, const float* src, int batch, W weight, const float* bias,
              float* dst, bool accumulate) {
  const bool narrow = g.outputs <= 8;
  const float* wpack = narrow ? pack_up<8>(g, weight) : pack_up<16>(g, weight);
  const std::size_t positions = sz(g.oh) * g.ow;
  for (int grp = 0; grp < group_count(batch); ++grp) {
    const float* in = load_group(src, batch, grp, g.channels, g.h, g.w, 0, kInput);
    float* out = group_output(dst, batch, positions * g.outputs);
    const bool add = accumulate && out == dst;
    if (narrow) {
      up_group<8>(g, in, wpack, bias, out, add);
    } else {
      up_group<16>(g, in, wpack, bias, out, add);
    }
    store_group(out, positions * g.outputs, dst, batch, grp, accumulate);
  }
}

// ---------------------------------------------------------------------------
// weight_grad
//
// `in` is a padded lane group ([C][H][W+2p][16]), `grad` an unpadded one
// ([O][OH][OW][16]); dw is out×in×k×k.

struct GradGeom {
  int channels, h, w, k, stride, pad, oh, ow, outputs;
  const float* zero_row = nullptr;  // stands in for rows past the last block
  int wp() const { return w + 2 * pad; }
};

// dw[o0+i][c0+j][ky][kx0+t] for i < BO, j < BC, t < K.
template <int BO, int BC, int K>
void grad_tile(const GradGeom& g, const float* in, const float* grad, int o0, int c0, int ky,
               int kx0, float* dw) {
  const int s = g.stride, wp = g.wp();
  const int bo = std::min(BO, g.outputs - o0);
  const int bc = std::min(BC, g.channels - c0);
  const float* zero_row = g.zero_row;
  vf acc[BO][BC][K] = {};
  for (int y = 0; y < g.oh; ++y) {
    const int iy = y * s + ky - g.pad;
    if (iy < 0 || iy >= g.h) continue;
    const float* gr[BO];
    const float* ir[BC];
    #pragma GCC unroll 32
    for (int i = 0; i < BO; ++i) {
      gr[i] = i < bo ? grad + ((sz(o0 + i) * g.oh + y) * g.ow) * kLanes : zero_row;
    }
    #pragma GCC unroll 32
    for (int j = 0; j < BC; ++j) {
      ir[j] = j < bc ? in + ((sz(c0 + j) * g.h + iy) * wp + kx0) * kLanes : zero_row;
    }
    for (int x = 0; x < g.ow; ++x) {
      vf d[BO];
      #pragma GCC unroll 32
      for (int i = 0; i < BO; ++i) d[i] = load(gr[i] + sz(x) * kLanes);
      #pragma GCC unroll 32
      for (int j = 0; j < BC; ++j) {
        const float* src = ir[j] + sz(x) * s * kLanes;
        #pragma GCC unroll 32
        for (int t = 0; t < K; ++t) {
          const vf xv = load(src + sz(t) * kLanes);
          #pragma GCC unroll 32
          for (int i = 0; i < BO; ++i) acc[i][j][t] += d[i] * xv;
        }
      }
    }
  }
  const std::size_t kk = sz(g.k) * g.k;
  #pragma GCC unroll 32
  for (int i = 0; i < BO; ++i) {
    #pragma GCC unroll 32
    for (int j = 0; j < BC; ++j) {
      if (i >= bo || j >= bc) continue;
      float* dst = dw + (sz(o0 + i) * g.channels + c0 + j) * kk + sz(ky) * g.k + kx0;
      #pragma GCC unroll 32
      for (int t = 0; t < K; ++t) dst[t] += hsum(acc[i][j][t]);
    }
  }
}

template <int BO, int BC, int K>
void grad_sweep(const GradGeom& g, const float* in, const float* grad, float* dw) {
  for (int c0 = 0; c0 < g.channels; c0 += BC) {
    for (int ky = 0; ky < g.k; ++ky) {
      for (int o0 = 0; o0 < g.outputs; o0 += BO) {
        if constexpr (K == 1) {
          for (int kx = 0; kx < g.k; ++kx) grad_tile<BO, BC, 1>(g, in, grad, o0, c0, ky, kx, dw);
        } else {
          grad_tile<BO, BC, K>(g, in, grad, o0, c0, ky, 0, dw);
        }
      }
    }
  }
}

// Sums of sixteen vectors, lane i of the result holding the sum of v[i].
inline vf reduce16(const vf (&v)[16]) {
  using vi = std::int32_t __attribute__((vector_size(kLanes * sizeof(std::int32_t))));
  constexpr vi lo8{0, 1, 2, 3, 4, 5, 6, 7, 16, 17, 18, 19, 20, 21, 22, 23};
  constexpr vi hi8{8, 9, 10, 11, 12, 13, 14, 15, 24, 25, 26, 27, 28, 29, 30, 31};
  constexpr vi lo4{0, 1, 2, 3, 8, 9, 10, 11, 16, 17, 18, 19, 24, 25, 26, 27};
  constexpr vi hi4{4, 5, 6, 7, 12, 13, 14, 15, 20, 21, 22, 23, 28, 29, 30, 31};
  constexpr vi lo2{0, 1, 4, 5, 8, 9, 12, 13, 16, 17, 20, 21, 24, 25, 28, 29};
  constexpr vi hi2{2, 3, 6, 7, 10, 11, 14, 15, 18, 19, 22, 23, 26, 27, 30, 31};
  constexpr vi lo1{0, 2, 4, 6, 8, 10, 12, 14, 16, 18, 20, 22, 24, 26, 28, 30};
  constexpr vi hi1{1, 3, 5, 7, 9, 11, 13, 15, 17, 19, 21, 23, 25, 27, 29, 31};
  vf a[8], b[4], c[2];
  #pragma GCC unroll 8
  for (int i = 0; i < 8; ++i) {
    a[i] = __builtin_shuffle(v[2 * i], v[2 * i + 1], lo8) +
           __builtin_shuffle(v[2 * i], v[2 * i + 1], hi8);
  }
  #pragma GCC unroll 4
  for (int i = 0; i < 4; ++i) {
    b[i] = __builtin_shuffle(a[2 * i], a[2 * i + 1], lo4) +
           __builtin_shuffle(a[2 * i], a[2 * i + 1], hi4);
  }
  #pragma GCC unroll 2
  for (int i = 0; i < 2; ++i) {
    c[i] = __builtin_shuffle(b[2 * i], b[2 * i + 1], lo2) +
           __builtin_shuffle(b[2 * i], b[2 * i + 1], hi2);
  }
  return __builtin_shuffle(c[0], c[1], lo1) + __builtin_shuffle(c[0], c[1], hi1);
}

// One kernel tap for a 4×4 block of (output, input) channels, summed over
// exactly the positions where the tap lands inside the image. `in` is an
// unpadded lane group here.
void tap_tile(const GradGeom& g, const float* in, const float* grad, int o0, int c0, int ky,
              int kx, float* dw) {
  constexpr int B = 4;
  const int s = g.stride, p = g.pad;
  const int bo = std::min(B, g.outputs - o0);
  const int bc = std::min(B, g.channels - c0);
  // Output positions y with 0 <= y*s + ky - p < h.
  const int y_lo = std::max(0, (p - ky + s - 1) / s);
  const int y_hi = std::min(g.oh, (g.h - 1 + p - ky) / s + 1);
  const int x_lo = std::max(0, (p - kx + s - 1) / s);
  const int x_hi = std::min(g.ow, (g.w - 1 + p - kx) / s + 1);
  vf acc[B][B] = {};
  for (int y = y_lo; y < y_hi; ++y) {
    const int iy = y * s + ky - p;
    const float* gr[B];
    const float* ir[B];
    #pragma GCC unroll 4
    for (int i = 0; i < B; ++i) {
      gr[i] = i < bo ? grad + (sz(o0 + i) * g.oh + y) * g.ow * kLanes : g.zero_row;
      ir[i] = i < bc ? in + ((sz(c0 + i) * g.h + iy) * g.w + kx - p) * kLanes : g.zero_row;
    }
    for (int x = x_lo; x < x_hi; ++x) {
      vf d[B], xv[B];
      #pragma GCC unroll 4
      for (int i = 0; i < B; ++i) {
        d[i] = load(gr[i] + sz(x) * kLanes);
        xv[i] = load(ir[i] + sz(x) * s * kLanes);
      }
      #pragma GCC unroll 4
      for (int i = 0; i < B; ++i) {
        #pragma GCC unroll 4
        for (int j = 0; j < B; ++j) acc[i][j] += d[i] * xv[j];
      }
    }
  }
  vf flat[16];
  #pragma GCC unroll 16
  for (int t = 0; t < 16; ++t) flat[t] = acc[t / B][t % B];
  const vf sums = reduce16(flat);
  const std::size_t kk = sz(g.k) * g.k;
  for (int i = 0; i < bo; ++i) {
    for (int j = 0; j < bc; ++j) {
      dw[(sz(o0 + i) * g.channels + c0 + j) * kk + sz(ky) * g.k + kx] += sums[i * B + j];
    }
  }
}

void tap_sweep(const GradGeom& g, const float* in, const float* grad, float* dw) {
  for (int o0 = 0; o0 < g.outputs; o0 += 4) {
    for (int c0 = 0; c0 < g.channels; c0 += 4) {
      for (int ky = 0; ky < g.k; ++ky) {
        for (int kx = 0; kx < g.k; ++kx) tap_tile(g, in, grad, o0, c0, ky, kx, dw);
      }
    }
  }
}

void weight_grad(GradGeom g, const float* in_src, const float* grad_src, int batch,
                 float* dw) {
  g.zero_row = zeros(sz(std::max(g.ow, g.wp()) * g.stride + g.k) * kLanes);
  // Small grids: exact tap ranges and a batched lane reduction beat the
  // x-sliding tiles, whose padding and per-output sums dominate there.
  if (g.w <= 8) {
    for (int grp = 0; grp < group_count(batch); ++grp) {
      const float* in = load_group(in_src, batch, grp, g.channels, g.h, g.w, 0, kInput);
      const float* grad = load_group(grad_src, batch, grp, g.outputs, g.oh, g.ow, 0, kGrad);
      tap_sweep(g, in, grad, dw);
    }
    return;
  }
  for (int grp = 0; grp < group_count(batch); ++grp) {
    const float* in = load_group(in_src, batch, grp, g.channels, g.h, g.w, g.pad, kInput);
    const float* grad = load_group(grad_src, batch, grp, g.outputs, g.oh, g.ow, 0, kGrad);
    switch (g.k) {
      case 3: grad_sweep<4, 2, 3>(g, in, grad, dw); break;
      case 4: grad_sweep<3, 2, 4>(g, in, grad, dw); break;
      case 5: grad_sweep<4, 1, 5>(g, in, grad, dw); break;
      case 7: grad_sweep<3, 1, 7>(g, in, grad, dw); break;
      default: grad_sweep<4, 4, 1>(g, in, grad, dw); break;
    }
  }
}

// ---------------------------------------------------------------------------

void bias_grad(std::span<const float> d_out, int channels, std::size_t per_channel,
               std::span<float> d_bias) {
  for (int c = 0; c < channels; ++c) {
    double acc = 0.0;
    const float* p = d_out.data() + sz(c) * per_channel;
    for (std::size_t i = 0; i < per_channel; ++i) acc += p[i];
    d_bias[c] += static_cast<float>(acc);
  }
}

void require_size(std::span<const float> s, std::size_t n, const char* what) {
  if (s.size() != n) {
    throw ShapeError(std::string(what) + ": expected " + std::to_string(n) + " values, got " +
                     std::to_string(s.size()));
  }
}

void require_optional_size(std::size_t actual, std::size_t n, const char* what) {
  if (actual != 0 && actual != n) {
    throw ShapeError(std::string(what) + ": expected " + std::to_string(n) + " values, got " +
                     std::to_string(actual));
  }
}

std::size_t weight_index(int o, int c, int ky, int kx, int channels, int k) {
  return ((sz(o) * channels + c) * k + ky) * k + kx;
}

}  // namespace

void ConvShape::validate() const {
  if (in_channels <= 0 || out_channels <= 0 || height <= 0 || width <= 0 || kernel <= 0 ||
      stride <= 0 || padding < 0 || batch <= 0) {
    throw ShapeError("invalid convolution parameters");
  }
  if (padding >= kernel) throw ShapeError("convolution padding must be smaller than the kernel");
  if (height + 2 * padding < kernel || width + 2 * padding < kernel) {
    throw ShapeError("convolution output extent is not positive");
  }
}

void TransposedShape::validate() const {
  if (in_channels <= 0 || out_channels <= 0 || height <= 0 || width <= 0 || kernel <= 0 ||
      stride <= 0 || padding < 0 || batch <= 0) {
    throw ShapeError("invalid transposed convolution parameters");
  }
  if (padding >= kernel) {
    throw ShapeError("transposed convolution padding must be smaller than the kernel");
  }
  if (out_height() <= 0 || out_width() <= 0) {
    throw ShapeError("transposed convolution output extent is not positive");
  }
  // The adjoint convolution must map the output grid back onto exactly
  // this input grid.
  const ConvShape adj = adjoint();
  if (adj.out_height() != height || adj.out_width() != width) {
    throw ShapeError("transposed convolution geometry is not invertible");
  }
}

ConvShape TransposedShape::adjoint() const {
  return ConvShape{out_channels, out_height(), out_width(), in_channels, kernel, stride, padding,
                   batch};
}

void conv2d_forward(const ConvShape& s, std::span<const float> in, std::span<const float> weight,
                    std::span<const float> bias, std::span<float> out) {
  s.validate();
  const int k = s.kernel, ci = s.in_channels;
  require_size(in, sz(ci) * s.height * s.width * s.batch, "conv2d input");
  require_size(weight, sz(s.out_channels) * ci * k * k, "conv2d weight");
  require_optional_size(bias.size(), sz(s.out_channels), "conv2d bias");
  require_size(out, sz(s.out_channels) * s.out_height() * s.out_width() * s.batch,
               "conv2d output");
  const DirectGeom g{ci, s.height, s.width, k, s.stride, s.padding,
                     s.out_height(), s.out_width(), s.out_channels};
  const float* w = weight.data();
  direct(
      g, in.data(), s.batch,
      [w, ci, k](int o, int c, int ky, int kx) { return w[weight_index(o, c, ky, kx, ci, k)]; },
      bias.empty() ? nullptr : bias.data(), out.data(), false);
}

void conv2d_backward(const ConvShape& s, std::span<const float> in,
                     std::span<const float> weight, std::span<const float> d_out,
                     std::span<float> d_in, std::span<float> d_weight, std::span<float> d_bias) {
  s.validate();
  const int k = s.kernel, ci = s.in_channels, co = s.out_channels;
  const int oh = s.out_height(), ow = s.out_width();
  require_size(in, sz(ci) * s.height * s.width * s.batch, "conv2d input");
  require_size(weight, sz(co) * ci * k * k, "conv2d weight");
  require_size(d_out, sz(co) * oh * ow * s.batch, "conv2d d_out");
  require_optional_size(d_in.size(), in.size(), "conv2d d_in");
  require_optional_size(d_weight.size(), weight.size(), "conv2d d_weight");
  require_optional_size(d_bias.size(), sz(co), "conv2d d_bias");

  if (!d_bias.empty()) bias_grad(d_out, co, sz(oh) * ow * s.batch, d_bias);
  if (!d_weight.empty()) {
    const GradGeom g{ci, s.height, s.width, k, s.stride, s.padding, oh, ow, co};
    weight_grad(g, in.data(), d_out.data(), s.batch, d_weight.data());
  }
  if (d_in.empty()) return;
  const float* w = weight.data();
  if (s.stride == 1) {
    // Correlation of d_out with the flipped, transposed kernel.
    const DirectGeom g{co, oh, ow, k, 1, k - 1 - s.padding, s.height, s.width, ci};
    direct(
        g, d_out.data(), s.batch,
        [w, ci, k](int o, int c, int ky, int kx) {
          return w[weight_index(c, o, k - 1 - ky, k - 1 - kx, ci, k)];
        },
        nullptr, d_in.data(), true);
  } else {
    const UpGeom g{co, oh, ow, k, s.stride, s.padding, s.height, s.width, ci};
    upgather(
        g, d_out.data(), s.batch,
        [w, ci, k](int o, int c, int ky, int kx) { return w[weight_index(c, o, ky, kx, ci, k)]; },
        nullptr, d_in.data(), true);
  }
}

void conv2d_transposed_forward(const TransposedShape& s, std::span<const float> in,
                               std::span<const float> weight, std::span<const float> bias,
                               std::span<float> out) {
  s.validate();
  const int k = s.kernel, ci = s.in_channels, co = s.out_channels;
  require_size(in, sz(ci) * s.height * s.width * s.batch, "conv2d_transposed input");
  require_size(weight, sz(ci) * co * k * k, "conv2d_transposed weight");
  require_optional_size(bias.size(), sz(co), "conv2d_transposed bias");
  require_size(out, sz(co) * s.out_height() * s.out_width() * s.batch,
               "conv2d_transposed output");
  const UpGeom g{ci, s.height, s.width, k, s.stride, s.padding, s.out_height(), s.out_width(), co};
  const float* w = weight.data();
  upgather(
      g, in.data(), s.batch,
      [w, co, k](int o, int c, int ky, int kx) { return w[weight_index(c, o, ky, kx, co, k)]; },
      bias.empty() ? nullptr : bias.data(), out.data(), false);
}

void conv2d_transposed_backward(const TransposedShape& s, std::span<const float> in,
                                std::span<const float> weight, std::span<const float> d_out,
                                std::span<float> d_in, std::span<float> d_weight,
                                std::span<float> d_bias) {
  s.validate();
  const int k = s.kernel, ci = s.in_channels, co = s.out_channels;
  const int oh = s.out_height(), ow = s.out_width();
  require_size(in, sz(ci) * s.height * s.width * s.batch, "conv2d_transposed input");
  require_size(weight, sz(ci) * co * k * k, "conv2d_transposed weight");
  require_size(d_out, sz(co) * oh * ow * s.batch, "conv2d_transposed d_out");
  require_optional_size(d_in.size(), in.size(), "conv2d_transposed d_in");
  require_optional_size(d_weight.size(), weight.size(), "conv2d_transposed d_weight");
  require_optional_size(d_bias.size(), sz(co), "conv2d_transposed d_bias");

  if (!d_bias.empty()) bias_grad(d_out, co, sz(oh) * ow * s.batch, d_bias);
  // Both gradients are those of the adjoint strided convolution, which maps
  // d_out (co planes) to ci planes with the same weight tensor.
  if (!d_weight.empty()) {
    const GradGeom g{co, oh, ow, k, s.stride, s.padding, s.height, s.width, ci};
    weight_grad(g, d_out.data(), in.data(), s.batch, d_weight.data());
  }
  if (!d_in.empty()) {
    const DirectGeom g{co, oh, ow, k, s.stride, s.padding, s.height, s.width, ci};
    const float* w = weight.data();
    direct(
        g, d_out.data(), s.batch,
        [w, co, k](int o, int c, int ky, int kx) { return w[weight_index(o, c, ky, kx, co, k)]; },
        nullptr, d_in.data(), true);
  }
}

}  // namespace msvq::kernels
