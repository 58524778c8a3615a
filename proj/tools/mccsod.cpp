// mccsod: train, infer, eval, ablate and pr-export from the command line.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <opencv2/imgcodecs.hpp>
#include <torch/torch.h>

#include "mccsod/ablation.hpp"
#include "mccsod/archive.hpp"
#include "mccsod/checkpoint.hpp"
#include "mccsod/config.hpp"
#include "mccsod/data.hpp"
#include "mccsod/errors.hpp"
#include "mccsod/metrics.hpp"
#include "mccsod/synthetic.hpp"
#include "mccsod/trainer.hpp"

namespace fs = std::filesystem;
using namespace mccsod;

namespace {

enum ExitCode { kOk = 0, kFailure = 1, kUsage = 2, kData = 3, kNumeric = 4 };

struct UsageError : Error {
  using Error::Error;
};

struct SharedOptions {
  std::string data_root;
  std::string split;
  std::string ckpt;
  std::string out;
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> smoke;
  std::optional<std::int64_t> iters;
};

void add_shared(CLI::App* cmd, SharedOptions& o, const std::string& default_split) {
  o.split = default_split;
  cmd->add_option("--data-root", o.data_root, "Dataset root holding <split>/image and <split>/GT");
  cmd->add_option("--split", o.split, "Dataset split")->capture_default_str();
  cmd->add_option("--ckpt", o.ckpt, "Checkpoint file");
  cmd->add_option("--out", o.out, "Output directory (file for pr-export)");
  cmd->add_option("--config", o.config, "INI config file; command-line flags override it");
  cmd->add_option("--seed", o.seed, "Random seed");
  cmd->add_option("--smoke", o.smoke, "Use only the first N images")->check(CLI::PositiveNumber);
  cmd->add_option("--iters", o.iters, "Stop after N optimizer steps")->check(CLI::PositiveNumber);
}

torch::Device device_from_env() {
  const char* env = std::getenv("MCCSOD_DEVICE");
  if (!env || !*env) return torch::kCPU;
  torch::Device d(env);
  if (d.is_cuda() && !torch::cuda::is_available())
    throw UsageError(std::string("MCCSOD_DEVICE=") + env + " but CUDA is not available in this build");
  return d;
}

RunConfig resolve_config(const SharedOptions& o) {
  RunConfig rc;
  if (!o.config.empty()) {
    if (!fs::is_regular_file(o.config)) throw UsageError("config file not found: " + o.config);
    apply_config_file(rc, o.config);
  }
  if (o.seed) rc.train.seed = *o.seed;
  if (o.iters) rc.train.max_iterations = *o.iters;
  rc.train.device = device_from_env();
  rc.network.validate();
  rc.train.validate();
  return rc;
}

void persist_config(const SharedOptions& o, const RunConfig& rc, const fs::path& out) {
  fs::create_directories(out);
  std::ofstream(out / "resolved_config.ini") << to_config_text(rc);
  if (!o.config.empty()) fs::copy_file(o.config, out / "input_config.ini", fs::copy_options::overwrite_existing);
}

fs::path require_dir(const std::string& value, const char* flag) {
  if (value.empty()) throw UsageError(std::string(flag) + " is required");
  if (!fs::is_directory(value)) throw UsageError(std::string(flag) + " is not a directory: " + value);
  return value;
}

std::string require(const std::string& value, const char* flag) {
  if (value.empty()) throw UsageError(std::string(flag) + " is required");
  return value;
}

SampleSource limited(SampleSource src, std::optional<int> n) {
  if (n && static_cast<std::size_t>(*n) < src.size) src.size = static_cast<std::size_t>(*n);
  return src;
}

SampleSource synthetic_source(std::uint64_t seed, int first, int count, const PrepareOptions& opts) {
  std::vector<Sample> samples;
  for (int i = first; i < first + count; ++i) {
    auto scene = synthesize_scene(seed, i, static_cast<int>(opts.size));
    char id[32];
    std::snprintf(id, sizeof id, "syn_%04d", i);
    samples.push_back(prepare(scene.bgr, scene.gt, opts, id));
  }
  return SampleSource::from_samples(std::move(samples));
}

int cmd_train(const SharedOptions& o) {
  const auto root = require_dir(o.data_root, "--data-root");
  const fs::path out = require(o.out, "--out");
  auto rc = resolve_config(o);
  persist_config(o, rc, out);

  auto manifest = load_dataset(root, o.split);
  auto data = limited(SampleSource::from_manifest(manifest, rc.prepare_options()), o.smoke);
  std::cerr << "training on " << data.size << " of " << manifest.size() << " images from " << (root / o.split)
            << "\n";

  TrainOutputs outputs{out, [](const StepRecord& s) {
                         if (s.iteration == 1 || s.iteration % 10 == 0)
                           std::cerr << "iter " << s.iteration << " epoch " << s.epoch << " lr " << s.learning_rate
                                     << " loss " << s.loss.total << "\n";
                       }};
  if (o.smoke) {
    const auto iters = o.iters.value_or(200);
    auto res = overfit_smoke(rc.network, rc.train, data, data.size, iters, outputs);
    std::cout << "smoke: " << data.size << " images, " << iters << " iterations, loss "
              << res.log.steps.front().loss.total << " -> " << res.log.steps.back().loss.total
              << ", mean F_max on training images " << res.mean_f_max << "\n";
  } else {
    auto res = train(rc.network, rc.train, data, outputs);
    std::cout << "trained " << res.log.steps.size() << " iterations; checkpoint " << res.final_checkpoint.string()
              << "\n";
  }
  return kOk;
}

int cmd_infer(const SharedOptions& o, const std::string& input) {
  const fs::path out = require(o.out, "--out");
  fs::path in_dir = input;
  if (in_dir.empty()) in_dir = require_dir(o.data_root, "--data-root or --input") / o.split / "image";
  if (!fs::is_directory(in_dir)) throw UsageError("input directory not found: " + in_dir.string());
  const auto ckpt_path = require(o.ckpt, "--ckpt");

  Checkpoint ck;
  try {
    ck = load_checkpoint(ckpt_path);
  } catch (const Error& e) {
    throw StateError(std::string("cannot load checkpoint: ") + e.what());
  }
  ck.net->to(device_from_env());
  Predictor predictor(ck.net);

  fs::create_directories(out);
  auto images = list_images(in_dir);
  if (o.smoke && static_cast<std::size_t>(*o.smoke) < images.size()) images.resize(*o.smoke);
  for (const auto& p : images) {
    auto bgr = cv::imread(p.string(), cv::IMREAD_COLOR);
    if (bgr.empty()) throw IoError("cannot decode " + p.string());
    write_saliency_png(out / (p.stem().string() + ".png"), predictor.predict(bgr));
  }
  std::cout << "wrote " << images.size() << " saliency maps to " << out.string() << "\n";
  return kOk;
}

EvalOptions eval_options(const SharedOptions& o) {
  RunConfig rc;
  if (!o.config.empty()) apply_config_file(rc, o.config);
  return rc.eval;
}

fs::path gt_dir_for(const SharedOptions& o, const std::string& gt) {
  if (!gt.empty()) return gt;
  return require_dir(o.data_root, "--data-root or --gt") / o.split / "GT";
}

int cmd_eval(const SharedOptions& o, const std::string& pred, const std::string& gt) {
  const auto pred_dir = require_dir(pred, "--pred");
  const auto gt_dir = gt_dir_for(o, gt);
  const fs::path out = require(o.out, "--out");
  auto report = evaluate_directory(pred_dir, gt_dir, eval_options(o));
  fs::create_directories(out);
  write_report(out / "report.txt", report);
  write_pr_csv(out / "pr.csv", report.pr);
  std::cout << format_report_table(report, pred_dir.filename().string());
  return kOk;
}

int cmd_pr_export(const SharedOptions& o, const std::string& pred, const std::string& gt,
                  const std::string& report_path) {
  const fs::path out = require(o.out, "--out");
  MetricReport report;
  if (!report_path.empty()) {
    report = read_report(report_path);
  } else {
    report = evaluate_directory(require_dir(pred, "--pred or --report"), gt_dir_for(o, gt), eval_options(o));
  }
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_pr_csv(out, report.pr);
  std::cout << "wrote " << kThresholdCount << " PR points to " << out.string() << "\n";
  return kOk;
}

int cmd_ablate(const SharedOptions& o, bool loss_ablation, bool no_original_content) {
  if (loss_ablation && no_original_content)
    throw UsageError("--loss-ablation and --no-original-content select different studies; pass one");
  auto rc = resolve_config(o);
  const fs::path out = o.out.empty() ? fs::path("ablation_out") : fs::path(o.out);
  persist_config(o, rc, out);

  const auto study = loss_ablation         ? AblationStudy::kLoss
                     : no_original_content ? AblationStudy::kOriginalContent
                                           : AblationStudy::kContent;
  const int n = o.smoke.value_or(4);
  if (!o.iters) rc.train.max_iterations = 20;
  const auto prep = rc.prepare_options();

  SampleSource train_data, test_data;
  if (!o.data_root.empty()) {
    const fs::path root = require_dir(o.data_root, "--data-root");
    train_data = limited(SampleSource::from_manifest(load_dataset(root, o.split), prep), n);
    test_data = fs::is_directory(root / "test")
                    ? limited(SampleSource::from_manifest(load_dataset(root, "test"), prep), n)
                    : train_data;
  } else {
    train_data = synthetic_source(rc.train.seed, 0, n, prep);
    test_data = synthetic_source(rc.train.seed, 1000, n, prep);
  }

  auto variants = ablation_variants(study, rc.network, rc.train.loss);
  std::cerr << "ablation: " << variants.size() << " variants, " << train_data.size << " training images, "
            << rc.train.max_iterations << " iterations each\n";
  auto rows = run_ablation(variants, rc.train, train_data, test_data, [](const AblationRow& r) {
    std::cerr << "  [" << r.variant.number << "] " << r.variant.label << " F_max " << r.report.f_max << "\n";
  });
  const auto table = format_ablation_table(rows, study);
  const char* name = study == AblationStudy::kContent ? "ablation_content.txt"
                     : study == AblationStudy::kLoss  ? "ablation_loss.txt"
                                                      : "ablation_original_content.txt";
  std::ofstream(out / name) << table;
  std::cout << table;
  return kOk;
}

int cmd_synth(const std::string& out, int count, const std::string& split, std::uint64_t seed, int size) {
  if (out.empty()) throw UsageError("--out is required");
  if (size < 16 || size % 16 != 0) throw UsageError("--size must be a positive multiple of 16");
  write_synthetic_split(out, split, count, seed, size);
  std::cout << "wrote " << count << " synthetic pairs to " << (fs::path(out) / split).string() << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Salient object detection for optical remote-sensing images"};
  app.require_subcommand(1);

  SharedOptions train_o, infer_o, eval_o, ablate_o, pr_o;
  auto* train_cmd = app.add_subcommand("train", "Train a network (or an overfit smoke run with --smoke)");
  add_shared(train_cmd, train_o, "train");

  auto* infer_cmd = app.add_subcommand("infer", "Write one saliency PNG per input image");
  add_shared(infer_cmd, infer_o, "test");
  std::string infer_input;
  infer_cmd->add_option("--input", infer_input, "Image directory (default <data-root>/<split>/image)");

  auto* eval_cmd = app.add_subcommand("eval", "Score predictions against ground truth");
  add_shared(eval_cmd, eval_o, "test");
  std::string eval_pred, eval_gt;
  eval_cmd->add_option("--pred", eval_pred, "Prediction PNG directory");
  eval_cmd->add_option("--gt", eval_gt, "Ground-truth PNG directory (default <data-root>/<split>/GT)");

  auto* ablate_cmd = app.add_subcommand("ablate", "Run the MCCM content, original-content or loss ablation");
  add_shared(ablate_cmd, ablate_o, "train");
  bool loss_ablation = false, no_original_content = false;
  ablate_cmd->add_flag("--loss-ablation", loss_ablation, "Compare BCE / BCE+IoU / BCE+F-m / all");
  ablate_cmd->add_flag("--no-original-content", no_original_content,
                       "Compare the full module without and with its short connection");

  auto* pr_cmd = app.add_subcommand("pr-export", "Write the 256-point PR curve as CSV");
  add_shared(pr_cmd, pr_o, "test");
  std::string pr_pred, pr_gt, pr_report;
  pr_cmd->add_option("--pred", pr_pred, "Prediction PNG directory");
  pr_cmd->add_option("--gt", pr_gt, "Ground-truth PNG directory");
  pr_cmd->add_option("--report", pr_report, "Existing report file written by eval");

  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic dataset split");
  std::string synth_out, synth_split = "train";
  int synth_count = 8, synth_size = 256;
  std::uint64_t synth_seed = 0;
  synth_cmd->add_option("--out", synth_out, "Dataset root");
  synth_cmd->add_option("--split", synth_split)->capture_default_str();
  synth_cmd->add_option("--count", synth_count)->capture_default_str()->check(CLI::PositiveNumber);
  synth_cmd->add_option("--size", synth_size)->capture_default_str();
  synth_cmd->add_option("--seed", synth_seed)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*train_cmd) return cmd_train(train_o);
    if (*infer_cmd) return cmd_infer(infer_o, infer_input);
    if (*eval_cmd) return cmd_eval(eval_o, eval_pred, eval_gt);
    if (*ablate_cmd) return cmd_ablate(ablate_o, loss_ablation, no_original_content);
    if (*pr_cmd) return cmd_pr_export(pr_o, pr_pred, pr_gt, pr_report);
    if (*synth_cmd) return cmd_synth(synth_out, synth_count, synth_split, synth_seed, synth_size);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kUsage;
  } catch (const PairingError& e) {
    std::cerr << "pairing error: " << e.what() << "\n";
    return kData;
  } catch (const EmptyManifestError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const IoError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const DimensionError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kUsage;
}
