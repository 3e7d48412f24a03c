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

#include "msvq/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

#include "msvq/adam.hpp"
#include "msvq/checkpoint.hpp"
#include "msvq/msb.hpp"
#include "msvq/ops.hpp"
#include "msvq/splice.hpp"

namespace msvq {
namespace {

std::string conv_name(int i) { return "cls.conv" + std::to_string(i + 1); }

std::vector<ParamSpec> describe_classifier(const ClassifierConfig& c) {
  std::vector<ParamSpec> specs;
  int in = 3;
  for (int i = 0; i < 3; ++i) {
    describe_conv(specs, conv_name(i), c.widths[i], in, 3);
    in = c.widths[i];
  }
  specs.push_back({"cls.fc.weight", {1, in}, in, false});
  specs.push_back({"cls.fc.bias", {1}, 1, true});
  return specs;
}

Var classifier_logits(ParamBinding& p, Var x) {
  Var h = x;
  for (int i = 0; i < 3; ++i) h = max_pool2(relu(conv_layer(p, conv_name(i), h, 1, 1)));
  return linear(global_avg_pool(h), p("cls.fc.weight"), p("cls.fc.bias"));
}

void require_images(std::span<const Tensor> images) {
  for (const Tensor& t : images) {
    if (t.rank() != 3 || t.dim(0) != 3 || t.dim(1) != t.dim(2) || t.dim(1) % 8 != 0 ||
        t.dims() != images.front().dims()) {
      throw ShapeError("classifier: images must share one 3×S×S shape with S divisible by 8");
    }
  }
}

struct FoldData {
  std::vector<Tensor> train;
  std::vector<int> train_labels;
  std::vector<Tensor> test;
  std::vector<int> test_labels;
};

}  // namespace

void ClassifierConfig::validate() const {
  for (int w : widths) {
    if (w <= 0) throw std::invalid_argument("classifier widths must be positive");
  }
  if (epochs <= 0 || batch_size <= 0 || !(lr > 0.0)) {
    throw std::invalid_argument("classifier epochs, batch size and lr must be positive");
  }
}

Classifier train_classifier(std::span<const Tensor> images, std::span<const int> labels,
                            const ClassifierConfig& config) {
  config.validate();
  if (images.size() != labels.size()) {
    throw std::invalid_argument("train_classifier: images and labels differ in length");
  }
  const auto positives = std::count(labels.begin(), labels.end(), 1);
  if (positives == 0 || positives == static_cast<std::ptrdiff_t>(labels.size())) {
    throw std::invalid_argument("train_classifier: both classes are required");
  }
  if (std::any_of(labels.begin(), labels.end(), [](int l) { return l != 0 && l != 1; })) {
    throw std::invalid_argument("train_classifier: labels must be 0 or 1");
  }
  require_images(images);

  Classifier c{config, init_params(describe_classifier(config), config.seed)};
  AdamState adam = make_adam_state(c.params);
  ParamSet grads = c.params.zeros_like();
  std::mt19937_64 rng(config.seed ^ 0xc1a55ull);
  std::vector<std::size_t> order(images.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto batch = static_cast<std::size_t>(config.batch_size);

  std::vector<Tensor> chunk;
  std::vector<float> targets;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t b = 0; b < order.size(); b += batch) {
      const std::size_t end = std::min(order.size(), b + batch);
      grads.fill(0.0f);
      for (std::size_t m = b; m < end; m += kMicroBatch) {
        const std::size_t m_end = std::min(end, m + kMicroBatch);
        chunk.clear();
        targets.clear();
        for (std::size_t i = m; i < m_end; ++i) {
          chunk.push_back(images[order[i]]);
          augment(chunk.back(), nullptr, rng, config.flips);
          targets.push_back(static_cast<float>(labels[order[i]]));
        }
        Graph g;
        ParamBinding p(g, c.params, &grads);
        const Var loss = bce_with_logits(classifier_logits(p, g.constant(stack_images(chunk))),
                                         targets);
        g.backward(scale(loss, static_cast<float>(m_end - m) / static_cast<float>(end - b)));
      }
      adam_step(c.params, grads, adam, config.lr);
    }
  }
  return c;
}

std::vector<float> classifier_scores(const Classifier& classifier,
                                     std::span<const Tensor> images) {
  if (images.empty()) return {};
  require_images(images);
  std::vector<float> scores;
  scores.reserve(images.size());
  for (std::size_t i = 0; i < images.size(); i += kMicroBatch) {
    const auto chunk = images.subspan(i, std::min(kMicroBatch, images.size() - i));
    Graph g(GradMode::kInference);
    ParamBinding p(g, classifier.params);
    const Tensor logits = classifier_logits(p, g.constant(stack_images(chunk))).value();
    scores.insert(scores.end(), logits.data().begin(), logits.data().end());
  }
  return scores;
}

double auc(std::span<const float> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("auc: length mismatch");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  double positives = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (std::isnan(scores[i])) throw std::invalid_argument("auc: NaN score");
    if (labels[i] != 0 && labels[i] != 1) throw std::invalid_argument("auc: labels must be 0/1");
    positives += labels[i];
  }
  const double negatives = static_cast<double>(scores.size()) - positives;
  if (positives == 0.0 || negatives == 0.0) {
    throw std::invalid_argument("auc: both classes are required");
  }
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Sum of (1-based, tie-averaged) ranks of the positives.
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t t = i; t < j; ++t) {
      if (labels[order[t]]) rank_sum += rank;
    }
    i = j;
  }
  return (rank_sum - positives * (positives + 1.0) / 2.0) / (positives * negatives);
}

std::string_view condition_name(Condition condition) {
  return condition == Condition::kReal ? "real" : "synthetic";
}

bool EvalReport::audit_passed() const {
  return !audits.empty() &&
         std::all_of(audits.begin(), audits.end(), [](const FoldAudit& a) { return a.passed; });
}

EvalReport five_fold_eval(std::span<const LabeledImage> dataset, int folds, const Model* model,
                          const EvalConfig& config, Condition condition, std::ostream* log) {
  if (folds < 2) throw std::invalid_argument("five_fold_eval: need at least two folds");
  if (condition == Condition::kSynthetic && model == nullptr) {
    throw std::invalid_argument("five_fold_eval: the synthetic condition needs a model");
  }
  std::vector<std::vector<std::size_t>> normals(folds), abnormals(folds);
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const LabeledImage& img = dataset[i];
    if (img.fold < 0 || img.fold >= folds) {
      throw std::invalid_argument("five_fold_eval: fold out of range");
    }
    (is_abnormal(img.label) ? abnormals : normals)[img.fold].push_back(i);
  }
  std::size_t normal_total = 0, abnormal_total = 0;
  for (int f = 0; f < folds; ++f) {
    if (normals[f].empty() || abnormals[f].empty()) {
      throw std::invalid_argument("five_fold_eval: fold " + std::to_string(f) +
                                  " lacks normal or abnormal images");
    }
    normal_total += normals[f].size();
    abnormal_total += abnormals[f].size();
  }
  const double ratio = static_cast<double>(abnormal_total) / static_cast<double>(normal_total);

  EvalReport report;
  report.condition = condition;
  for (int f = 0; f < folds; ++f) {
    std::vector<std::size_t> train_normals, bases;
    for (int o = 0; o < folds; ++o) {
      if (o == f) continue;
      train_normals.insert(train_normals.end(), normals[o].begin(), normals[o].end());
      for (std::size_t i : abnormals[o]) {
        if (condition == Condition::kReal || mask_area_fraction(*dataset[i].mask) <= kMaxAbnormalArea) {
          bases.push_back(i);
        }
      }
    }
    if (bases.empty()) throw std::invalid_argument("five_fold_eval: no eligible base abnormals");
    const auto target = static_cast<std::size_t>(
        std::lround(ratio * static_cast<double>(train_normals.size())));
    const std::uint64_t fold_seed = config.seed + 0x9e3779b97f4a7c15ull * (f + 1);

    FoldData data;
    // Provenance of every training abnormal: (normal source, abnormal source).
    std::vector<std::pair<std::optional<std::size_t>, std::size_t>> provenance;
    for (std::size_t i : train_normals) {
      data.train.push_back(dataset[i].pixels);
      data.train_labels.push_back(0);
    }
    if (condition == Condition::kReal) {
      std::vector<std::size_t> chosen = bases;
      std::mt19937_64 rng(fold_seed);
      std::shuffle(chosen.begin(), chosen.end(), rng);
      chosen.resize(std::min(chosen.size(), target));
      std::sort(chosen.begin(), chosen.end());
      for (std::size_t i : chosen) {
        data.train.push_back(dataset[i].pixels);
        data.train_labels.push_back(1);
        provenance.push_back({std::nullopt, i});
      }
    } else {
      const std::vector<SplicePair> pairs =
          draw_pairs(train_normals.size(), bases.size(), fold_seed, target);
      std::vector<SpliceRequest> requests;
      requests.reserve(pairs.size());
      for (const SplicePair& pr : pairs) {
        const LabeledImage& a = dataset[bases[pr.abnormal]];
        requests.push_back({dataset[train_normals[pr.normal]].pixels, a.pixels, *a.mask});
        provenance.push_back({train_normals[pr.normal], bases[pr.abnormal]});
      }
      for (SpliceResult& r : synthesize(*model, requests)) {
        data.train.push_back(std::move(r.image));
        data.train_labels.push_back(1);
      }
    }
    std::set<std::size_t> test_ids;
    for (std::size_t i : abnormals[f]) {
      data.test.push_back(dataset[i].pixels);
      data.test_labels.push_back(1);
      test_ids.insert(i);
    }
    for (std::size_t i : normals[f]) {
      data.test.push_back(dataset[i].pixels);
      data.test_labels.push_back(0);
      test_ids.insert(i);
    }

    FoldAudit audit;
    audit.fold = f;
    audit.train_normals = train_normals.size();
    audit.train_abnormals = provenance.size();
    audit.test_normals = normals[f].size();
    audit.test_abnormals = abnormals[f].size();
    std::ostringstream why;
    for (std::size_t i : train_normals) {
      if (test_ids.count(i)) why << "training normal " << i << " is in the test set; ";
    }
    for (const auto& [normal_src, abnormal_src] : provenance) {
      const LabeledImage& a = dataset[abnormal_src];
      if (test_ids.count(abnormal_src) || a.fold == f || !is_abnormal(a.label)) {
        why << "training abnormal derived from test-fold image " << abnormal_src << "; ";
      }
      if (normal_src && (test_ids.count(*normal_src) || is_abnormal(dataset[*normal_src].label))) {
        why << "splice background " << *normal_src << " is not a training normal; ";
      }
    }
    const double expected = ratio * static_cast<double>(train_normals.size());
    if (condition == Condition::kSynthetic || bases.size() >= target) {
      if (std::abs(static_cast<double>(provenance.size()) - expected) > 1.0) {
        why << "training abnormal count " << provenance.size() << " departs from " << expected
            << "; ";
      }
    }
    audit.detail = why.str();
    audit.passed = audit.detail.empty();
    if (audit.passed) audit.detail = "ok";

    ClassifierConfig cc = config.classifier;
    cc.seed = config.classifier.seed + static_cast<std::uint64_t>(f);
    const Classifier clf = train_classifier(data.train, data.train_labels, cc);
    const double fold_auc = auc(classifier_scores(clf, data.test), data.test_labels);
    report.fold_auc.push_back(fold_auc);
    if (log) {
      *log << condition_name(condition) << " fold " << f << ": auc " << fold_auc << " (train "
           << audit.train_normals << "+" << audit.train_abnormals << ", test "
           << audit.test_normals << "+" << audit.test_abnormals << ", audit " << audit.detail
           << ")\n";
    }
    report.audits.push_back(std::move(audit));
  }
  const double n = static_cast<double>(report.fold_auc.size());
  report.mean = std::accumulate(report.fold_auc.begin(), report.fold_auc.end(), 0.0) / n;
  double ss = 0.0;
  for (double a : report.fold_auc) ss += (a - report.mean) * (a - report.mean);
  report.stddev = n > 1 ? std::sqrt(ss / (n - 1)) : 0.0;
  return report;
}

EvalReport five_fold_eval(const DatasetManifest& manifest, const std::string& base_dir,
                          const std::optional<std::string>& checkpoint, const EvalConfig& config,
                          Condition condition, std::ostream* log) {
  if (condition == Condition::kSynthetic && !checkpoint) {
    throw std::invalid_argument("five_fold_eval: the synthetic condition needs a checkpoint");
  }
  const std::vector<LabeledImage> dataset = load_dataset(manifest, base_dir);
  std::optional<Model> model;
  if (checkpoint) model = load_checkpoint(*checkpoint);
  return five_fold_eval(dataset, manifest.folds, model ? &*model : nullptr, config, condition, log);
}

std::string format_report(const EvalReport& report) {
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(4);
  out << "condition " << condition_name(report.condition) << "\n";
  for (std::size_t f = 0; f < report.fold_auc.size(); ++f) {
    out << "  fold " << f << "  auc " << report.fold_auc[f] << "  audit "
        << (f < report.audits.size() ? report.audits[f].detail : "-") << "\n";
  }
  out << "  mean " << report.mean << "  std " << report.stddev << "  audit "
      << (report.audit_passed() ? "pass" : "FAIL") << "\n";
  return out.str();
}

void write_report_table(std::span<const EvalReport> reports, const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << "fold\tcondition\tauc\n";
  f.precision(17);
  for (const EvalReport& r : reports) {
    for (std::size_t i = 0; i < r.fold_auc.size(); ++i) {
      f << i << '\t' << condition_name(r.condition) << '\t' << r.fold_auc[i] << '\n';
    }
  }
  if (!f) throw std::runtime_error("failed writing " + path);
}

}  // namespace msvq
