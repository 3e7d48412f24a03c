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

// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
// exits non-zero if any fails. The desk-scale model trained for criterion 6
// is shared with criteria 4, 7, 8 and 10.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "msvq/checkpoint.hpp"
#include "msvq/eval.hpp"
#include "msvq/gradcheck_suite.hpp"
#include "msvq/splice.hpp"
#include "msvq/train.hpp"

namespace msvq {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
  bool passed = false;
  std::string detail;
};

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), format, args...);
  return buf;
}

// Shared desk-scale run.
struct DeskRun {
  std::vector<LabeledImage> dataset;
  Model model;
  TrainResult result;
  double seconds = 0.0;
};

DeskRun& desk() {
  static std::optional<DeskRun> run;
  if (run) return *run;
  run.emplace();
  run->dataset = generate_phantom_set({.count = 400, .size = 32, .seed = 1});
  ModelConfig config = ModelConfig::desk_scale();
  config.beta = 0.25;
  run->model = make_model(config, 7);
  std::vector<Tensor> images;
  for (const LabeledImage& img : run->dataset) images.push_back(img.pixels);
  TrainConfig tc;
  tc.epochs = 200;
  tc.batch_size = 16;
  tc.seed = 3;
  const auto start = Clock::now();
  run->result = train(run->model, images, tc, [](const EpochLog& e) {
    if (e.epoch % 20 == 0 || e.epoch == 199) {
      std::cout << fmt("  [train] epoch %3d  l_rec %.5f  l_commit %.5f  usage %.3f  %.2fs\n",
                       e.epoch, e.l_rec, e.l_commit, e.codebook_usage_batch, e.seconds)
                << std::flush;
    }
  });
  run->seconds = seconds_since(start);
  return *run;
}

Outcome gradient_correctness() {
  const auto start = Clock::now();
  const std::vector<FamilyCheck> checks = run_gradcheck_suite(11);
  const double secs = seconds_since(start);
  double worst = 0.0;
  std::string per_family;
  for (const FamilyCheck& c : checks) {
    worst = std::max(worst, c.report.max_rel_error);
    per_family += fmt(" %s=%.2e", c.family.c_str(), c.report.max_rel_error);
    if (c.report.checked == 0) return {false, c.family + " checked no coordinates"};
  }
  return {worst <= 1e-4 && secs <= 120.0,
          fmt("max rel err %.3e (tol 1e-4), %.1fs (limit 120s);", worst, secs) + per_family};
}

Outcome quantizer_oracles() {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> normal;
  int mismatches = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int k_count = 1 + static_cast<int>(rng() % 1024);
    const int dim = 1 + static_cast<int>(rng() % 256);
    Codebook cb(k_count, dim);
    for (float& v : cb.data()) v = static_cast<float>(normal(rng));
    std::vector<float> z(static_cast<std::size_t>(dim));
    if (trial % 4 == 0) {
      // Exact hit on a duplicated row: the lower index must win.
      const int k = static_cast<int>(rng() % k_count);
      const int dup = static_cast<int>(rng() % k_count);
      std::copy(cb.row(k).begin(), cb.row(k).end(), cb.row(dup).begin());
      std::copy(cb.row(k).begin(), cb.row(k).end(), z.begin());
    } else {
      for (float& v : z) v = static_cast<float>(normal(rng));
    }
    int best = 0;
    double best_dist = 0.0;
    for (int k = 0; k < k_count; ++k) {
      double d = 0.0;
      for (int i = 0; i < dim; ++i) {
        const double diff = double(z[i]) - double(cb.row(k)[i]);
        d += diff * diff;
      }
      if (k == 0 || d < best_dist) best = k, best_dist = d;
    }
    mismatches += nearest_code<float>(z, cb) != best;
  }

  const int k_count = 12, dim = 6;
  BasicCodebook<double> cb(k_count, dim);
  BasicEmaState<double> state;
  init_codebook(cb, state, 22);
  std::vector<double> n_hat(k_count, 1.0), m_hat(cb.data().begin(), cb.data().end());
  double worst = 0.0;
  for (int step = 0; step < 10; ++step) {
    BatchStats batch(k_count, dim);
    const int cells = 1 + static_cast<int>(rng() % 64);
    for (int c = 0; c < cells; ++c) {
      std::vector<double> z(dim);
      for (double& v : z) v = normal(rng);
      batch.add(static_cast<int>(rng() % k_count), std::span<const double>(z));
    }
    ema_update(state, cb, batch);
    for (int k = 0; k < k_count; ++k) {
      n_hat[k] = 0.99 * n_hat[k] + 0.01 * batch.counts[k];
      for (int d = 0; d < dim; ++d) {
        double& m = m_hat[k * dim + d];
        m = 0.99 * m + 0.01 * batch.sums[k * dim + d];
        worst = std::max(worst, std::abs(cb.row(k)[d] - m / (n_hat[k] + 1e-5)));
      }
    }
  }
  return {mismatches == 0 && worst <= 1e-12,
          fmt("nearest_code mismatches %d/1000; EMA max abs deviation %.2e (tol 1e-12)", mismatches,
              worst)};
}

Outcome geometry() {
  std::string detail;
  bool ok = true;
  for (const ModelConfig& c : {ModelConfig::paper_scale(), ModelConfig::desk_scale()}) {
    const Model m = make_model(c, 1);
    const Tensor z = encode(m, Tensor({3, c.image_size, c.image_size}, 0.5f));
    const Tensor x = decode(m, z);
    const Shape want_z{c.embedding_dim, c.latent_size(), c.latent_size()};
    const Shape want_x{3, c.image_size, c.image_size};
    ok &= z.dims() == want_z && x.dims() == want_x;
    detail += fmt("%s -> %s -> %s; ", to_string(want_x).c_str(), to_string(z.dims()).c_str(),
                  to_string(x.dims()).c_str());
  }
  const ModelConfig p = ModelConfig::paper_scale(), d = ModelConfig::desk_scale();
  ok &= p.image_size == 224 && p.embedding_dim == 256 && p.latent_size() == 28;
  ok &= d.image_size == 32 && d.embedding_dim == 16 && d.latent_size() == 4;
  return {ok, detail};
}

Outcome loss_identity() {
  const DeskRun& run = desk();
  double worst = 0.0, grad = 0.0;
  for (const LossReport& r : run.result.steps) {
    worst = std::max(worst, loss_identity_error(r, run.model.config.beta));
    grad = std::max(grad, r.codebook_grad_max);
  }
  return {!run.result.steps.empty() && worst <= 1e-6 && grad == 0.0,
          fmt("%zu steps, max rel identity error %.2e (tol 1e-6), max codebook grad %.1e",
              run.result.steps.size(), worst, grad)};
}

Outcome init_fixed_point() {
  double worst_ratio = 0.0;
  std::string detail;
  for (const ModelConfig& c : {ModelConfig::paper_scale(), ModelConfig::desk_scale()}) {
    Model m = make_model(c, 5);
    const Codebook before = m.codebook;
    ema_update(m.ema, m.codebook, BatchStats(c.codebook_size, c.embedding_dim));
    const double bound = 2.0 * c.epsilon / c.gamma;
    double worst = 0.0;
    for (int k = 0; k < c.codebook_size; ++k) {
      double diff = 0.0, norm = 0.0;
      for (int i = 0; i < c.embedding_dim; ++i) {
        const double e = before.row(k)[i];
        diff += std::pow(m.codebook.row(k)[i] - e, 2);
        norm += e * e;
      }
      worst = std::max(worst, std::sqrt(diff / norm));
    }
    worst_ratio = std::max(worst_ratio, worst / bound);
    detail += fmt("K=%d D=%d max rel change %.3e (bound %.3e); ", c.codebook_size,
                  c.embedding_dim, worst, bound);
  }
  return {worst_ratio <= 1.0, detail};
}

Outcome training_sanity() {
  const DeskRun& run = desk();
  const double first = run.result.epochs.front().l_rec;
  const double last = run.result.epochs.back().l_rec;
  const double drop = 1.0 - last / first;
  const double usage = run.result.final_usage.usage_fraction;
  return {drop >= 0.6 && usage >= 0.75 && run.seconds <= 600.0,
          fmt("l_rec %.5f -> %.5f (drop %.1f%%, need 60%%), usage %.3f (need 0.75), "
              "perplexity %.1f, %.0fs (limit 600s)",
              first, last, 100.0 * drop, usage, run.result.final_usage.perplexity, run.seconds)};
}

// Shallow model in which one latent cell reaches only part of the image, so
// the pixel check is not vacuous.
ModelConfig shallow_config() {
  ModelConfig c;
  c.image_size = 32;
  c.base_channels = 4;
  c.stages = 1;
  c.codebook_size = 16;
  c.embedding_dim = 8;
  return c;
}

struct LocalityCount {
  int map_violations = 0;
  int pixel_violations = 0;
  std::size_t pixels_checked = 0;
};

LocalityCount check_locality(const Model& model, const std::vector<LabeledImage>& set,
                             std::uint64_t seed) {
  std::vector<std::size_t> normals, abnormals;
  for (std::size_t i = 0; i < set.size(); ++i) {
    (is_abnormal(set[i].label) ? abnormals : normals).push_back(i);
  }
  LocalityCount out;
  for (const SplicePair& p : draw_pairs(normals.size(), abnormals.size(), seed, 20)) {
    const LabeledImage& n = set[normals[p.normal]];
    const LabeledImage& a = set[abnormals[p.abnormal]];
    const SpliceResult r = synthesize(model, {n.pixels, a.pixels, *a.mask});
    const LatentIndexMap normal_map = encode_indices(model, n.pixels);
    for (std::size_t i = 0; i < normal_map.indices.size(); ++i) {
      if (!r.cells.bits[i]) out.map_violations += r.spliced_map.indices[i] != normal_map.indices[i];
    }
    Mask changed(r.cells.height, r.cells.width);
    for (std::size_t i = 0; i < changed.bits.size(); ++i) {
      changed.bits[i] = r.spliced_map.indices[i] != normal_map.indices[i];
    }
    const Mask reach = influence_mask(model.config, changed);
    const Tensor rec = decode_indices(model, normal_map);
    const int s = model.config.image_size;
    for (int y = 0; y < s; ++y) {
      for (int x = 0; x < s; ++x) {
        if (reach.at(y, x)) continue;
        for (int c = 0; c < 3; ++c) {
          ++out.pixels_checked;
          out.pixel_violations += r.image.at(c, y, x) != rec.at(c, y, x);
        }
      }
    }
  }
  return out;
}

Outcome splice_locality() {
  const LocalityCount d = check_locality(desk().model, desk().dataset, 31);
  const Model shallow = make_model(shallow_config(), 32);
  const auto shallow_set = generate_phantom_set({.count = 60, .size = 32, .seed = 33});
  const LocalityCount s = check_locality(shallow, shallow_set, 34);
  return {d.map_violations + d.pixel_violations + s.map_violations + s.pixel_violations == 0 &&
              s.pixels_checked > 0,
          fmt("desk model: %d map / %d pixel mismatches over %zu unreachable values; "
              "one-stage model: %d map / %d pixel mismatches over %zu unreachable values",
              d.map_violations, d.pixel_violations, d.pixels_checked, s.map_violations,
              s.pixel_violations, s.pixels_checked)};
}

Outcome downstream_mirror() {
  DeskRun& run = desk();
  const EvalConfig config;
  const auto start = Clock::now();
  const EvalReport real = five_fold_eval(run.dataset, 5, &run.model, config, Condition::kReal, &std::cout);
  const EvalReport syn =
      five_fold_eval(run.dataset, 5, &run.model, config, Condition::kSynthetic, &std::cout);
  const double secs = seconds_since(start);
  const double gap = std::abs(syn.mean - real.mean);
  return {secs <= 1800.0 && syn.mean >= 0.80 && gap <= 0.15 && real.audit_passed() &&
              syn.audit_passed(),
          fmt("real AUC %.3f±%.3f, synthetic AUC %.3f±%.3f (need >= 0.80), gap %.3f (need <= 0.15), "
              "audits %s/%s, %.0fs (limit 1800s)",
              real.mean, real.stddev, syn.mean, syn.stddev, gap,
              real.audit_passed() ? "pass" : "FAIL", syn.audit_passed() ? "pass" : "FAIL", secs)};
}

Outcome auc_oracle() {
  std::mt19937_64 rng(41);
  int mismatches = 0;
  for (int set = 0; set < 100; ++set) {
    const int n = 2 + static_cast<int>(rng() % 200);
    std::vector<float> scores(n);
    std::vector<int> labels(n);
    for (int i = 0; i < n; ++i) {
      scores[i] = set % 2 ? static_cast<float>(rng() % 16) : std::ldexp(float(rng() >> 40), -24);
      labels[i] = static_cast<int>(rng() % 2);
    }
    labels[0] = 0;
    labels[1] = 1;
    double wins = 0.0;
    long pairs = 0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (labels[i] == 1 && labels[j] == 0) {
          ++pairs;
          wins += scores[i] > scores[j] ? 1.0 : scores[i] == scores[j] ? 0.5 : 0.0;
        }
    mismatches += auc(scores, labels) != wins / static_cast<double>(pairs);
  }
  return {mismatches == 0, fmt("%d/100 sets differ from pair counting", mismatches)};
}

Outcome reproducibility() {
  const DeskRun& run = desk();
  const auto path = std::filesystem::temp_directory_path() / "msvq_acceptance.ckpt";
  save_checkpoint(run.model, path.string());
  const Model loaded = load_checkpoint(path.string());
  std::filesystem::remove(path);
  std::vector<Tensor> probe;
  for (int i = 0; i < 8; ++i) probe.push_back(run.dataset[i].pixels);
  const Tensor batch = stack_images(probe);
  const bool exact = loaded.config == run.model.config && loaded.params.bit_equal(run.model.params) &&
                     codebook_tensor(loaded.codebook).bit_equal(codebook_tensor(run.model.codebook)) &&
                     loaded.ema.n_hat == run.model.ema.n_hat && loaded.ema.m_hat == run.model.ema.m_hat &&
                     reconstruct(loaded, batch).bit_equal(reconstruct(run.model, batch));

  // Two short fixed-seed runs from scratch.
  std::vector<Tensor> images;
  for (int i = 0; i < 64; ++i) images.push_back(run.dataset[i].pixels);
  TrainConfig tc;
  tc.epochs = 3;
  tc.seed = 5;
  std::vector<std::vector<double>> traces;
  for (int rep = 0; rep < 2; ++rep) {
    Model m = make_model(ModelConfig::desk_scale(), 9);
    const TrainResult r = train(m, images, tc);
    std::vector<double> trace;
    for (const LossReport& s : r.steps) {
      trace.insert(trace.end(), {s.l_rec, s.l_commit, s.l_total, s.codebook_usage_batch});
    }
    traces.push_back(std::move(trace));
  }
  const bool same = traces[0] == traces[1] && !traces[0].empty();
  return {exact && same, fmt("checkpoint round trip %s; two fixed-seed runs: %zu logged values, %s",
                             exact ? "bit-exact" : "DIFFERS", traces[0].size(),
                             same ? "identical" : "DIFFER")};
}

}  // namespace
}  // namespace msvq

int main() {
  using namespace msvq;
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"gradient correctness", gradient_correctness},
      {"quantizer oracles", quantizer_oracles},
      {"geometry", geometry},
      {"loss identity", loss_identity},
      {"init fixed point", init_fixed_point},
      {"desk training sanity", training_sanity},
      {"splice locality", splice_locality},
      {"downstream mirror", downstream_mirror},
      {"AUC oracle", auc_oracle},
      {"reproducibility", reproducibility},
  };
  std::vector<std::string> lines;
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.passed;
    lines.push_back(fmt("criterion %2zu %-22s %s  ", i + 1, criteria[i].first,
                        o.passed ? "PASS" : "FAIL") +
                    o.detail);
    std::cout << lines.back() << "\n" << std::flush;
  }
  std::cout << "\nsummary\n";
  for (const std::string& l : lines) std::cout << l << "\n";
  std::cout << (failures == 0 ? "all criteria passed\n" : std::to_string(failures) + " criteria failed\n");
  return failures == 0 ? 0 : 1;
}
