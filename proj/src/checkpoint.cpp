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

#include "msvq/checkpoint.hpp"

#include <bit>
#include <climits>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <stdexcept>

namespace msvq {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoints assume little-endian");

constexpr char kMagic[4] = {'M', 'S', 'V', 'Q'};
constexpr char kCodebook[] = "vq.codebook";
constexpr char kCounts[] = "vq.ema.n_hat";
constexpr char kSums[] = "vq.ema.m_hat";

class Writer {
 public:
  template <typename T>
  void put(T v) {
    char raw[sizeof(T)];
    std::memcpy(raw, &v, sizeof(T));
    out_.append(raw, sizeof(T));
  }
  void put_bytes(const void* p, std::size_t n) { out_.append(static_cast<const char*>(p), n); }
  const std::string& bytes() const { return out_; }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(const std::string& bytes, std::size_t end) : in_(bytes), end_(end) {}

  template <typename T>
  T get() {
    T v;
    std::memcpy(&v, take(sizeof(T)), sizeof(T));
    return v;
  }
  const char* take(std::size_t n) {
    if (n > end_ - pos_) throw FormatError("truncated payload");
    const char* p = in_.data() + pos_;
    pos_ += n;
    return p;
  }
  bool done() const { return pos_ == end_; }

 private:
  const std::string& in_;
  std::size_t end_;
  std::size_t pos_ = 0;
};

void put_tensor(Writer& w, const std::string& name, const Tensor& t) {
  if (name.size() > UINT16_MAX) throw std::invalid_argument("tensor name too long: " + name);
  w.put(static_cast<std::uint16_t>(name.size()));
  w.put_bytes(name.data(), name.size());
  w.put(static_cast<std::uint8_t>(t.rank()));
  for (int d : t.dims()) w.put(static_cast<std::uint32_t>(d));
  w.put_bytes(t.raw(), t.size() * sizeof(float));
}

Tensor vector_tensor(std::span<const float> v, Shape dims) {
  return Tensor(std::move(dims), std::vector<float>(v.begin(), v.end()));
}

}  // namespace

void save_checkpoint(const Model& model, const std::string& path) {
  const ModelConfig& c = model.config;
  std::map<std::string, Tensor> tensors(model.params.begin(), model.params.end());
  tensors.emplace(kCodebook, codebook_tensor(model.codebook));
  tensors.emplace(kCounts, vector_tensor(model.ema.n_hat, {c.codebook_size}));
  tensors.emplace(kSums, vector_tensor(model.ema.m_hat, {c.codebook_size, c.embedding_dim}));

  Writer w;
  w.put_bytes(kMagic, sizeof(kMagic));
  w.put(static_cast<std::uint32_t>(kCheckpointVersion));
  for (int v : {c.codebook_size, c.embedding_dim, c.image_size, c.base_channels, c.stages}) {
    w.put(static_cast<std::uint32_t>(v));
  }
  for (double v : {c.beta, c.gamma, c.epsilon}) w.put(v);
  w.put(static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) put_tensor(w, name, t);

  const std::filesystem::path target(path);
  const std::filesystem::path tmp = target.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write checkpoint " + tmp.string());
    f.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
    if (!f) throw std::runtime_error("failed writing checkpoint " + tmp.string());
  }
  std::filesystem::rename(tmp, target);
}

Model load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open checkpoint " + path);
  const std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (bytes.size() < sizeof(kMagic) || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw FormatError(path + ": bad magic");
  }
  Reader r(bytes, bytes.size());
  r.take(sizeof(kMagic));
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw FormatError(path + ": version mismatch (file " + std::to_string(version) + ", reader " +
                      std::to_string(kCheckpointVersion) + ")");
  }
  ModelConfig c;
  for (int* v : {&c.codebook_size, &c.embedding_dim, &c.image_size, &c.base_channels, &c.stages}) {
    const auto raw = r.get<std::uint32_t>();
    if (raw > static_cast<std::uint32_t>(INT32_MAX)) throw FormatError(path + ": bad hyperparameter");
    *v = static_cast<int>(raw);
  }
  for (double* v : {&c.beta, &c.gamma, &c.epsilon}) *v = r.get<double>();
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw FormatError(path + ": invalid config: " + e.what());
  }

  std::map<std::string, Tensor> tensors;
  const auto count = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = r.get<std::uint16_t>();
    std::string name(r.take(len), len);
    const auto rank = r.get<std::uint8_t>();
    if (rank == 0 || rank > 8) throw FormatError(path + ": bad rank for " + name);
    Shape dims(rank);
    for (int& d : dims) {
      const auto raw = r.get<std::uint32_t>();
      if (raw == 0 || raw > (1u << 28)) throw FormatError(path + ": bad extent for " + name);
      d = static_cast<int>(raw);
    }
    Tensor t(dims);
    std::memcpy(t.raw(), r.take(t.size() * sizeof(float)), t.size() * sizeof(float));
    if (!tensors.emplace(std::move(name), std::move(t)).second) {
      throw FormatError(path + ": duplicate tensor");
    }
  }
  if (!r.done()) throw FormatError(path + ": trailing bytes");

  const auto extract = [&](const std::string& name, const Shape& dims) {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw FormatError(path + ": missing tensor " + name);
    if (it->second.dims() != dims) throw FormatError(path + ": wrong extents for " + name);
    Tensor t = std::move(it->second);
    tensors.erase(it);
    return t;
  };

  Model m;
  m.config = c;
  for (const ParamSpec& spec : describe_model(c)) m.params.add(spec.name, extract(spec.name, spec.dims));
  m.codebook = codebook_from_tensor(extract(kCodebook, {c.codebook_size, c.embedding_dim}));
  const Tensor n_hat = extract(kCounts, {c.codebook_size});
  const Tensor m_hat = extract(kSums, {c.codebook_size, c.embedding_dim});
  m.ema.n_hat.assign(n_hat.data().begin(), n_hat.data().end());
  m.ema.m_hat.assign(m_hat.data().begin(), m_hat.data().end());
  m.ema.gamma = c.gamma;
  m.ema.epsilon = c.epsilon;
  if (!tensors.empty()) throw FormatError(path + ": unexpected tensor " + tensors.begin()->first);
  return m;
}

}  // namespace msvq
