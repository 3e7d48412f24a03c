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

// Downstream evaluation: a small normal-vs-abnormal classifier, rank AUC, and
// the cross-validated comparison of real against spliced training
// abnormals.

#ifndef MSVQ_EVAL_HPP_
#define MSVQ_EVAL_HPP_

#include <array>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "msvq/data.hpp"
#include "msvq/model.hpp"

namespace msvq {

struct ClassifierConfig {
  std::array<int, 3> widths{8, 16, 32};
  int epochs = 30;
  double lr = 3e-3;
  int batch_size = 16;
  std::uint64_t seed = 0;
  FlipPolicy flips;

  void validate() const;
};

/// Three conv3×3+ReLU+max-pool stages, global average pooling and an affine
/// output unit.
struct Classifier {
  ClassifierConfig config;
  ParamSet params;
};

/// Binary cross-entropy with Adam on labels 0 (normal) / 1 (abnormal).
/// Images must be 3×S×S with S divisible by 8. Throws std::invalid_argument
/// unless both classes are present.
Classifier train_classifier(std::span<const Tensor> images, std::span<const int> labels,
                            const ClassifierConfig& config);

/// Logits; larger means more likely abnormal.
std::vector<float> classifier_scores(const Classifier& classifier, std::span<const Tensor> images);

/// Mann-Whitney rank statistic: the probability that a positive outscores a
/// negative, ties counting 1/2. Throws std::invalid_argument for a single
/// class, mismatched lengths or NaN scores.
double auc(std::span<const float> scores, std::span<const int> labels);

enum class Condition { kReal, kSynthetic };
std::string_view condition_name(Condition condition);

struct EvalConfig {
  ClassifierConfig classifier;
  std::uint64_t seed = 0;  // splice pairing
};

/// Per-fold record of what went into training and testing.
struct FoldAudit {
  int fold = 0;
  std::size_t train_normals = 0;
  std::size_t train_abnormals = 0;
  std::size_t test_normals = 0;
  std::size_t test_abnormals = 0;
  bool passed = false;
  std::string detail;
};

struct EvalReport {
  Condition condition = Condition::kReal;
  std::vector<double> fold_auc;
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation over folds
  std::vector<FoldAudit> audits;

  bool audit_passed() const;
};

/// For each fold f: the test set is the real abnormals and the normals
/// assigned to f; training normals are the normals of the other folds. Real
/// condition: training abnormals are the real abnormals of the other folds.
/// Synthetic condition: training abnormals are spliced from those same base
/// abnormals onto training normals. Both conditions use
/// round(#abnormal/#normal · #training normals) training abnormals. The
/// synthetic condition requires a model. Throws std::invalid_argument for an
/// empty fold or a missing model.
EvalReport five_fold_eval(std::span<const LabeledImage> dataset, int folds, const Model* model,
                          const EvalConfig& config, Condition condition,
                          std::ostream* log = nullptr);

/// Manifest-level form; `checkpoint` is required for the synthetic
/// condition.
EvalReport five_fold_eval(const DatasetManifest& manifest, const std::string& base_dir,
                          const std::optional<std::string>& checkpoint, const EvalConfig& config,
                          Condition condition, std::ostream* log = nullptr);

std::string format_report(const EvalReport& report);
/// Tab-separated rows "fold condition auc" with a header line.
void write_report_table(std::span<const EvalReport> reports, const std::string& path);

}  // namespace msvq

#endif  // MSVQ_EVAL_HPP_
