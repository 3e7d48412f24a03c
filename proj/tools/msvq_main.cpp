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

// Command-line entry point. Run `msvq --help` for the subcommands.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "msvq/checkpoint.hpp"
#include "msvq/config.hpp"
#include "msvq/data.hpp"
#include "msvq/eval.hpp"
#include "msvq/gradcheck_suite.hpp"
#include "msvq/splice.hpp"
#include "msvq/train.hpp"

namespace fs = std::filesystem;

namespace msvq {
namespace {

void log_header(const std::string& command, std::uint64_t seed) {
  std::cout << "msvq " << command << "  build " << build_id() << "  seed " << seed << "\n";
}

void log_config(const RunConfig& c) {
  std::cout << "config:\n";
  std::istringstream lines(format_run_config(c));
  for (std::string line; std::getline(lines, line);) std::cout << "  " << line << "\n";
}

std::string parent_dir(const std::string& path) {
  const fs::path p = fs::path(path).parent_path();
  return p.empty() ? "." : p.string();
}

std::vector<LabeledImage> load_prepared(const std::string& manifest_path, int folds,
                                        const RunConfig& c) {
  const DatasetManifest manifest = parse_manifest(manifest_path, folds);
  std::vector<LabeledImage> images = load_dataset(manifest, parent_dir(manifest_path));
  for (LabeledImage& img : images) {
    img.pixels = c.prepare(img.pixels);
    if (img.mask) img.mask = c.prepare(*img.mask);
  }
  return images;
}

RunConfig config_or_default(const std::string& path) {
  RunConfig c = path.empty() ? RunConfig{} : load_run_config(path);
  c.validate();
  return c;
}

// --- phantom ---------------------------------------------------------------

struct PhantomArgs {
  int count = 400;
  std::uint64_t seed = 0;
  std::string out;
  int size = 32;
  double normal_share = 0.5;
  int folds = 5;
};

int run_phantom(const PhantomArgs& a) {
  log_header("phantom", a.seed);
  PhantomSetSpec spec;
  spec.count = a.count;
  spec.seed = a.seed;
  spec.size = a.size;
  spec.normal_share = a.normal_share;
  spec.folds = a.folds;
  const auto images = generate_phantom_set(spec);
  const DatasetManifest m = write_dataset(images, a.out, a.folds);
  std::cout << "wrote " << m.records.size() << " images and "
            << (fs::path(a.out) / "manifest.tsv").string() << "\n";
  return 0;
}

// --- train -----------------------------------------------------------------

struct TrainArgs {
  std::string config;
  std::string manifest;
  std::string checkpoint;
  std::string metrics;
  int log_every = 10;
};

int run_train(const TrainArgs& a) {
  RunConfig c = config_or_default(a.config);
  if (!a.manifest.empty()) c.manifest = a.manifest;
  if (c.manifest.empty()) throw std::invalid_argument("no manifest given (config or --manifest)");
  log_header("train", c.seed);
  log_config(c);

  const auto dataset = load_prepared(c.manifest, 5, c);
  std::vector<Tensor> images;
  for (const LabeledImage& img : dataset) images.push_back(img.pixels);
  std::cout << "images: " << images.size() << "\n";

  fs::create_directories(c.output_dir);
  fs::create_directories(c.checkpoint_dir);
  const std::string metrics_path =
      a.metrics.empty() ? (fs::path(c.output_dir) / "train_metrics.tsv").string() : a.metrics;
  std::ofstream metrics(metrics_path, std::ios::trunc);
  if (!metrics) throw std::runtime_error("cannot write " + metrics_path);
  metrics << "epoch\tlr\tl_rec\tl_commit\tl_total\tusage_batch\tseconds\n";
  metrics.precision(9);

  Model model = make_model(c.model, c.seed);
  const int every = std::max(1, a.log_every);
  const TrainResult r = train(model, images, c.train_config(), [&](const EpochLog& e) {
    metrics << e.epoch << '\t' << e.lr << '\t' << e.l_rec << '\t' << e.l_commit << '\t'
            << e.l_total << '\t' << e.codebook_usage_batch << '\t' << e.seconds << '\n';
    metrics.flush();
    if (e.epoch % every == 0 || e.epoch + 1 == c.epochs) {
      std::printf("epoch %4d  lr %.3g  l_rec %.6f  l_commit %.6f  l_total %.6f  usage %.3f  %.2fs\n",
                  e.epoch, e.lr, e.l_rec, e.l_commit, e.l_total, e.codebook_usage_batch,
                  e.seconds);
      std::fflush(stdout);
    }
  });

  const std::string ckpt =
      a.checkpoint.empty() ? (fs::path(c.checkpoint_dir) / "model.ckpt").string() : a.checkpoint;
  save_checkpoint(model, ckpt);
  const EpochLog& last = r.epochs.back();
  std::printf(
      "final\tepochs=%d\tl_rec=%.9g\tl_commit=%.9g\tl_total=%.9g\tusage=%.6f\tperplexity=%.6f\t"
      "identity_error=%.3g\tcodebook_grad_max=%.3g\tcheckpoint=%s\n",
      static_cast<int>(r.epochs.size()), last.l_rec, last.l_commit, last.l_total,
      r.final_usage.usage_fraction, r.final_usage.perplexity, r.max_identity_error,
      r.max_codebook_grad, ckpt.c_str());
  return 0;
}

// --- reconstruct -----------------------------------------------------------

struct ImageArgs {
  std::string checkpoint;
  std::string input;
  std::string output;
  int crop = 0;
};

RunConfig prep_for(const Model& m, int crop) {
  RunConfig c;
  c.model = m.config;
  c.crop = crop;
  return c;
}

int run_reconstruct(const ImageArgs& a) {
  log_header("reconstruct", 0);
  const Model model = load_checkpoint(a.checkpoint);
  const Tensor x = prep_for(model, a.crop).prepare(load_image(a.input));
  const Tensor y = reconstruct(model, x);
  save_image(y, a.output);
  std::printf("wrote %s  mse %.6g\n", a.output.c_str(), reconstruction_loss(x, y));
  return 0;
}

// --- synthesize ------------------------------------------------------------

struct SynthArgs {
  std::string checkpoint;
  std::string normal, abnormal, mask, output;
  std::string manifest, out;
  std::size_t count = 0;
  std::uint64_t seed = 0;
  int crop = 0;
};

int run_synthesize(const SynthArgs& a) {
  log_header("synthesize", a.seed);
  const Model model = load_checkpoint(a.checkpoint);
  if (!a.manifest.empty()) {
    if (a.out.empty()) throw std::invalid_argument("--manifest needs --out");
    const DatasetManifest in = parse_manifest(a.manifest);
    const DatasetManifest out = batch_synthesize(in, parent_dir(a.manifest), model, a.seed,
                                                 a.count, a.out, std::cout);
    std::cout << "wrote " << out.records.size() << " synthetic images to " << a.out << "\n";
    return 0;
  }
  if (a.normal.empty() || a.abnormal.empty() || a.mask.empty() || a.output.empty()) {
    throw std::invalid_argument(
        "single synthesis needs --normal, --abnormal, --mask and --output (or use --manifest)");
  }
  const RunConfig prep = prep_for(model, a.crop);
  const SpliceRequest req{prep.prepare(load_image(a.normal)), prep.prepare(load_image(a.abnormal)),
                          prep.prepare(load_mask(a.mask))};
  const SpliceResult r = synthesize(model, req);
  save_image(r.image, a.output);
  std::cout << "wrote " << a.output << "  (" << r.cells.count() << " latent cells replaced)\n";
  return 0;
}

// --- eval ------------------------------------------------------------------

struct EvalArgs {
  std::string config;
  std::string manifest;
  std::string checkpoint;
  std::string condition = "both";
  std::string out;
};

int run_eval(const EvalArgs& a) {
  RunConfig c = config_or_default(a.config);
  if (!a.manifest.empty()) c.manifest = a.manifest;
  if (c.manifest.empty()) throw std::invalid_argument("no manifest given (config or --manifest)");
  log_header("eval", c.seed);
  log_config(c);
  std::vector<Condition> conditions;
  if (a.condition == "real" || a.condition == "both") conditions.push_back(Condition::kReal);
  if (a.condition == "synthetic" || a.condition == "both") {
    conditions.push_back(Condition::kSynthetic);
  }
  std::optional<Model> model;
  if (!a.checkpoint.empty()) model = load_checkpoint(a.checkpoint);
  if (model && !(model->config == c.model)) {
    std::cout << "note: using the checkpoint's model configuration\n";
    c.model = model->config;
  }
  const auto dataset = load_prepared(c.manifest, 5, c);

  std::vector<EvalReport> reports;
  for (Condition cond : conditions) {
    if (cond == Condition::kSynthetic && !model) {
      throw std::invalid_argument("the synthetic condition needs --checkpoint");
    }
    reports.push_back(five_fold_eval(dataset, 5, model ? &*model : nullptr, c.eval_config(), cond,
                                     &std::cout));
    std::cout << format_report(reports.back());
  }
  fs::create_directories(c.output_dir);
  const std::string table =
      a.out.empty() ? (fs::path(c.output_dir) / "eval.tsv").string() : a.out;
  write_report_table(reports, table);
  std::cout << "wrote " << table << "\n";
  for (const EvalReport& r : reports) {
    if (!r.audit_passed()) {
      std::cout << "error: exclusion audit failed\n";
      return 1;
    }
  }
  return 0;
}

// --- codebook-stats --------------------------------------------------------

int run_codebook_stats(const std::string& checkpoint, const std::string& manifest, int crop) {
  log_header("codebook-stats", 0);
  const Model model = load_checkpoint(checkpoint);
  const auto dataset = load_prepared(manifest, 5, prep_for(model, crop));
  std::vector<Tensor> images;
  for (const LabeledImage& img : dataset) images.push_back(img.pixels);
  const UsageReport u = dataset_usage(model, images);
  std::printf("usage %.6f  perplexity %.6f  K %d\n", u.usage_fraction, u.perplexity,
              model.config.codebook_size);
  for (std::size_t k = 0; k < u.counts.size(); ++k) {
    std::printf("code %zu\t%lld\n", k, static_cast<long long>(u.counts[k]));
  }
  return 0;
}

// --- gradcheck -------------------------------------------------------------

int run_gradcheck(std::uint64_t seed, std::size_t coords) {
  log_header("gradcheck", seed);
  bool ok = true;
  for (const FamilyCheck& f : run_gradcheck_suite(seed, coords)) {
    const bool pass = f.report.max_rel_error <= kGradcheckTolerance;
    ok = ok && pass;
    std::printf("%-28s max_rel_error %.3e  checked %zu  skipped %zu  %s\n", f.family.c_str(),
                f.report.max_rel_error, f.report.checked, f.report.skipped,
                pass ? "ok" : "FAIL");
  }
  return ok ? 0 : 1;
}

}  // namespace
}  // namespace msvq

int main(int argc, char** argv) {
  using namespace msvq;
  CLI::App app{"Multiscale vector-quantized autoencoder: training, splicing, evaluation"};
  app.require_subcommand(1);

  PhantomArgs phantom;
  auto* ph = app.add_subcommand("phantom", "Write a procedural phantom dataset with manifest");
  ph->add_option("--n", phantom.count, "Number of images")->check(CLI::NonNegativeNumber);
  ph->add_option("--seed", phantom.seed, "Generator seed");
  ph->add_option("--out", phantom.out, "Output directory")->required();
  ph->add_option("--size", phantom.size, "Image side in pixels");
  ph->add_option("--normal-share", phantom.normal_share, "Fraction of normal images");
  ph->add_option("--folds", phantom.folds, "Number of folds");

  TrainArgs train_args;
  auto* tr = app.add_subcommand("train", "Train a model and write a checkpoint");
  tr->add_option("--config", train_args.config, "Run configuration file")->required();
  tr->add_option("--manifest", train_args.manifest, "Dataset manifest (overrides config)");
  tr->add_option("--checkpoint", train_args.checkpoint, "Checkpoint path");
  tr->add_option("--metrics", train_args.metrics, "Per-epoch metrics file");
  tr->add_option("--log-every", train_args.log_every, "Epochs between log lines");

  ImageArgs rec;
  auto* rc = app.add_subcommand("reconstruct", "Encode, quantize and decode one image");
  rc->add_option("--checkpoint", rec.checkpoint, "Model checkpoint")->required();
  rc->add_option("--input", rec.input, "Input PPM image")->required();
  rc->add_option("--output", rec.output, "Reconstructed PPM image")->required();
  rc->add_option("--crop", rec.crop, "Centre crop before resizing (0: none)");

  SynthArgs syn;
  auto* sy = app.add_subcommand("synthesize", "Splice abnormal codes into normal images");
  sy->add_option("--checkpoint", syn.checkpoint, "Model checkpoint")->required();
  sy->add_option("--normal", syn.normal, "Single mode: normal image");
  sy->add_option("--abnormal", syn.abnormal, "Single mode: abnormal image");
  sy->add_option("--mask", syn.mask, "Single mode: mask of the abnormal image");
  sy->add_option("--output", syn.output, "Single mode: output image");
  sy->add_option("--manifest", syn.manifest, "Batch mode: source manifest");
  sy->add_option("--out", syn.out, "Batch mode: output directory");
  sy->add_option("--count", syn.count, "Batch mode: number of images");
  sy->add_option("--seed", syn.seed, "Batch mode: pairing seed");
  sy->add_option("--crop", syn.crop, "Centre crop before resizing (0: none)");

  EvalArgs ev;
  auto* evc = app.add_subcommand("eval", "Cross-validated real vs synthetic comparison");
  evc->add_option("--config", ev.config, "Run configuration file");
  evc->add_option("--manifest", ev.manifest, "Dataset manifest (overrides config)");
  evc->add_option("--checkpoint", ev.checkpoint, "Model for the synthetic condition");
  evc->add_option("--condition", ev.condition, "Training abnormals: real, synthetic or both")
      ->check(CLI::IsMember({"real", "synthetic", "both"}));
  evc->add_option("--out", ev.out, "Delimited report path");

  std::string cs_checkpoint, cs_manifest;
  int cs_crop = 0;
  auto* cs = app.add_subcommand("codebook-stats", "Codebook usage over a dataset");
  cs->add_option("--checkpoint", cs_checkpoint, "Model checkpoint")->required();
  cs->add_option("--manifest", cs_manifest, "Dataset manifest")->required();
  cs->add_option("--crop", cs_crop, "Centre crop before resizing (0: none)");

  std::uint64_t gc_seed = 1;
  std::size_t gc_coords = 256;
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference check of every layer family");
  gc->add_option("--seed", gc_seed);
  gc->add_option("--coords", gc_coords, "Coordinates per family");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*ph) return run_phantom(phantom);
    if (*tr) return run_train(train_args);
    if (*rc) return run_reconstruct(rec);
    if (*sy) return run_synthesize(syn);
    if (*evc) return run_eval(ev);
    if (*cs) return run_codebook_stats(cs_checkpoint, cs_manifest, cs_crop);
    if (*gc) return run_gradcheck(gc_seed, gc_coords);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
