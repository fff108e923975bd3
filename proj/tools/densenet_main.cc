// tools/densenet_main.cc

// Copyright 2026  The densenet-am authors

// See ../COPYING for clarification regarding multiple authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

// densenet: inspect, featurize, train, eval, gradcheck, synthdata.

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>

#include "CLI11.hpp"
#include "densenet/archive.h"
#include "densenet/checkpoint.h"
#include "densenet/gradcheck.h"
#include "densenet/keyvalue.h"
#include "densenet/manifest.h"
#include "densenet/model.h"
#include "densenet/run_config.h"
#include "densenet/trainer.h"

namespace {

using namespace densenet;

enum ExitCode {
  kOk = 0,
  kFailure = 1,
  kConfig = 2,
  kIo = 3,
  kDiverged = 4,
  kMismatch = 5,
};

struct CommonOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  bool deterministic = false;
  std::vector<std::string> overrides;
};

void AddCommon(CLI::App* cmd, CommonOptions& opts) {
  cmd->add_option("--config", opts.config_path, "key=value run configuration file");
  cmd->add_option("--seed", opts.seed, "seed for initialization, shuffling and synthetic data");
  cmd->add_flag("--deterministic", opts.deterministic,
                "reproducible outputs (metrics log records 0 seconds)");
  cmd->add_option("--set", opts.overrides, "KEY=VALUE override, repeatable")
      ->allow_extra_args(false);
}

// Defaults, then the config file, then --set, then the dedicated flags.
RunConfig Resolve(const CommonOptions& opts) {
  RunConfig cfg;
  if (!opts.config_path.empty()) cfg = LoadRunConfig(opts.config_path);
  for (const auto& item : opts.overrides) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0)
      throw ConfigError("--set expects KEY=VALUE, got '" + item + "'");
    cfg.Set(item.substr(0, eq), item.substr(eq + 1));
  }
  if (opts.seed) cfg.Set("seed", std::to_string(*opts.seed));
  if (opts.deterministic) cfg.Set("deterministic", "true");
  return cfg;
}

std::string Size(int h, int w) { return std::to_string(h) + "x" + std::to_string(w); }

std::string Join(const std::vector<std::string>& parts, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? sep : "") + parts[i];
  return out;
}

int CmdInspect(const RunConfig& cfg, bool machine) {
  const ArchitectureTable plan = PlanArchitecture(cfg.model);
  const Model<float> model = BuildModel<float>(cfg.model, cfg.train.seed);
  const ParameterCount count = CountParameters(model);
  // The table is rendered from the plan; the built network has to agree.
  const Tensor<float> probe({2, cfg.model.input_channels, cfg.model.input_height,
                             cfg.model.input_width});
  const auto realized = model.RealizedStageShapes(probe);
  for (std::size_t s = 0; s < plan.stages.size(); ++s) {
    const auto& st = plan.stages[s];
    const Shape want{st.out_channels, st.out_h, st.out_w};
    if (realized.at(s) != want)
      throw ShapeError("stage " + st.name + " realizes " + ShapeString(realized[s]) +
                       ", plan says " + ShapeString(want));
    if (count.per_stage.at(s) != st.parameters)
      throw Error("stage " + st.name + " holds " + std::to_string(count.per_stage[s]) +
                  " parameters, plan says " + std::to_string(st.parameters));
  }

  if (machine) {
    std::cout << "#stage\tkind\tname\tin_channels\tin_size\tout_channels\tout_size\trepeat\t"
                 "layers\tparameters\n";
    for (std::size_t s = 0; s < plan.stages.size(); ++s) {
      const auto& st = plan.stages[s];
      std::cout << s << '\t' << StageKindName(st.kind) << '\t' << st.name << '\t'
                << st.in_channels << '\t' << Size(st.in_h, st.in_w) << '\t'
                << st.out_channels << '\t' << Size(st.out_h, st.out_w) << '\t' << st.repeat
                << '\t' << Join(st.layers, ";") << '\t' << count.per_stage[s] << '\n';
    }
    std::cout << "total\t" << count.total << '\n';
    return kOk;
  }

  const auto& m = cfg.model;
  std::cout << "DenseNet" << (m.variant == Variant::kPlain ? "" : "-" + std::string(VariantName(m.variant)))
            << ", depth " << m.depth << " (" << plan.layers_per_block
            << " layers per block, effective depth " << plan.effective_depth << "), "
            << m.blocks << " dense blocks, growth rate " << m.growth_rate
            << ", compression " << FormatDouble(m.compression) << "\n"
            << "input " << m.input_channels << "x" << m.input_height << "x" << m.input_width
            << ", " << m.num_classes << " classes\n\n";
  std::cout << std::left << std::setw(18) << "Layers" << std::setw(13) << "Output size"
            << std::setw(10) << "Channels" << std::setw(34) << "Operations" << "Parameters\n";
  for (std::size_t s = 0; s < plan.stages.size(); ++s) {
    const auto& st = plan.stages[s];
    std::vector<std::string> ops = st.layers;
    std::vector<std::string> sizes(ops.size(), "");
    if (st.kind == StageKind::kDenseBlock) {
      ops = {"[" + Join(st.layers, ", ") + "] x " + std::to_string(st.repeat)};
      sizes = {Size(st.out_h, st.out_w)};
    } else if (st.kind == StageKind::kTransition) {
      sizes = {Size(st.pre_pool_h, st.pre_pool_w), Size(st.out_h, st.out_w)};
    } else {
      sizes.back() = Size(st.out_h, st.out_w);
    }
    for (std::size_t i = 0; i < ops.size(); ++i) {
      std::cout << std::setw(18) << (i == 0 ? st.name : "") << std::setw(13) << sizes[i]
                << std::setw(10) << (i == 0 ? std::to_string(st.out_channels) : "")
                << std::setw(34) << ops[i] << (i == 0 ? std::to_string(count.per_stage[s]) : "")
                << '\n';
    }
  }
  std::cout << "\nTotal parameters: " << count.total << '\n';
  return kOk;
}

int CmdFeaturize(const RunConfig& cfg) {
  const auto entries = ReadManifest(cfg.RequirePath("manifest"));
  if (entries.empty()) throw InputError("manifest lists no utterances");
  const FeatureArchive archive = FeaturizeManifest(entries, cfg.features);
  const CmvnStats stats = ComputeCmvnStats(archive.utterances);
  WriteArchive(archive, cfg.RequirePath("archive"));
  WriteCmvnStats(stats, cfg.RequirePath("stats"));
  std::size_t frames = 0;
  for (const auto& u : archive.utterances) frames += u.num_frames();
  std::cout << "featurized " << archive.utterances.size() << " utterances, " << frames
            << " frames -> " << cfg.RequirePath("archive") << "\n";
  return kOk;
}

int CmdSynthdata(const RunConfig& cfg) {
  const FeatureArchive archive = MakeSyntheticDataset(cfg.synthetic());
  WriteArchive(archive, cfg.RequirePath("archive"));
  std::cout << "wrote " << archive.utterances.size() << " utterances, "
            << cfg.synthetic().frames << " frames -> " << cfg.RequirePath("archive") << "\n";
  return kOk;
}

std::vector<UtteranceFeatures> LoadUtterances(const RunConfig& cfg, const std::string& key,
                                              const std::optional<CmvnStats>& stats) {
  auto utts = ReadArchive(cfg.RequirePath(key)).utterances;
  if (utts.empty()) throw InputError("archive '" + cfg.RequirePath(key) + "' is empty");
  if (stats)
    for (auto& u : utts) u = ApplyCmvn(u, *stats);
  return utts;
}

std::optional<CmvnStats> LoadStats(const RunConfig& cfg) {
  if (auto p = cfg.path("stats")) return ReadCmvnStats(*p);
  return std::nullopt;
}

int CmdTrain(const RunConfig& cfg) {
  cfg.train.Validate();
  const std::string checkpoint = cfg.RequirePath("checkpoint");
  const auto stats = LoadStats(cfg);
  auto train_utts = LoadUtterances(cfg, "train_archive", stats);
  std::vector<UtteranceFeatures> valid_utts;
  if (cfg.path("valid_archive")) {
    valid_utts = LoadUtterances(cfg, "valid_archive", stats);
  } else {
    std::tie(train_utts, valid_utts) =
        SplitValidation(std::move(train_utts), cfg.train.validation_fraction, cfg.train.seed);
  }
  const int l = cfg.train.context_left, r = cfg.train.context_right;
  const FrameDataset train = MakeFrameDataset(train_utts, l, r);
  const FrameDataset valid = MakeFrameDataset(valid_utts, l, r);
  Model<float> model = BuildModel<float>(cfg.model, cfg.train.seed);

  std::ofstream log_file;
  if (auto p = cfg.path("metrics_log")) {
    log_file.open(*p, std::ios::binary | std::ios::trunc);
    if (!log_file) throw InputError("cannot open metrics log '" + *p + "' for writing");
  }
  struct Tee : std::streambuf {
    std::streambuf* a;
    std::streambuf* b;
    int overflow(int c) override {
      if (c == EOF) return 0;
      if (b) b->sputc(static_cast<char>(c));
      return a->sputc(static_cast<char>(c));
    }
    int sync() override {
      if (b) b->pubsync();
      return a->pubsync();
    }
  } tee;
  tee.a = std::cout.rdbuf();
  tee.b = log_file.is_open() ? log_file.rdbuf() : nullptr;
  std::ostream log(&tee);

  std::cout << "training on " << train.size() << " frames, validating on " << valid.size()
            << "\n";
  const TrainResult result = Train(std::move(model), train, valid, cfg.train, &log);
  log.flush();
  if (log_file.is_open() && !log_file) throw InputError("failed writing the metrics log");
  SaveCheckpoint(result.best, cfg.train.seed, checkpoint);
  std::cout << "stopped after " << result.history.size() << " epochs ("
            << result.stop_reason << "); best epoch " << result.best_epoch << " -> "
            << checkpoint << "\n";
  return kOk;
}

int CmdEval(const RunConfig& cfg) {
  const Checkpoint ckpt = LoadCheckpoint(cfg.RequirePath("checkpoint"));
  const DenseNetConfig& stored = ckpt.model.config();
  const auto want = stored.ToKeyValues();
  const auto given = cfg.model.ToKeyValues();
  for (const auto& key : DenseNetConfigKeys())
    if (cfg.given.count(key) && want.at(key) != given.at(key))
      throw ShapeError("configuration sets " + key + "=" + given.at(key) +
                       " but the checkpoint was trained with " + key + "=" + want.at(key));

  const auto utts = LoadUtterances(cfg, "eval_archive", LoadStats(cfg));
  const FrameDataset data =
      MakeFrameDataset(utts, cfg.train.context_left, cfg.train.context_right);
  if (data.channels != stored.input_channels || data.height != stored.input_height ||
      data.width != stored.input_width)
    throw ShapeError("data geometry " + std::to_string(data.channels) + "x" +
                     std::to_string(data.height) + "x" + std::to_string(data.width) +
                     " does not match checkpoint geometry " +
                     std::to_string(stored.input_channels) + "x" +
                     std::to_string(stored.input_height) + "x" +
                     std::to_string(stored.input_width));
  const int max_label = *std::max_element(data.labels.begin(), data.labels.end());
  if (max_label >= stored.num_classes)
    throw LabelError("data has class id " + std::to_string(max_label) +
                     " but the checkpoint has " + std::to_string(stored.num_classes) +
                     " classes");

  const EvalResult r = Evaluate(ckpt.model, data, cfg.train.batch_size);
  std::cout << "frames " << r.total << "\n"
            << "loss " << FormatDouble(r.loss) << "\n"
            << "frame_accuracy " << FormatDouble(r.accuracy) << "\n"
            << "frame_error_rate " << FormatDouble(1.0 - r.accuracy) << "\n"
            << "# class\tframes\tcorrect\taccuracy\tmost_confused_with\n";
  for (int c = 0; c < r.num_classes; ++c) {
    std::int64_t frames = 0, worst_count = 0;
    int worst = -1;
    for (int p = 0; p < r.num_classes; ++p) {
      frames += r.count(c, p);
      if (p != c && r.count(c, p) > worst_count) {
        worst_count = r.count(c, p);
        worst = p;
      }
    }
    if (frames == 0) continue;
    std::cout << c << '\t' << frames << '\t' << r.count(c, c) << '\t'
              << FormatDouble(static_cast<double>(r.count(c, c)) / static_cast<double>(frames))
              << '\t' << (worst < 0 ? "-" : std::to_string(worst) + " (" + std::to_string(worst_count) + ")")
              << '\n';
  }
  return kOk;
}

int CmdGradcheck(const RunConfig& cfg, int instances) {
  std::vector<GradcheckResult> rows = RunLayerGradchecks(instances, cfg.train.seed);
  DenseNetConfig small;
  small.variant = cfg.model.variant;
  small.compression = cfg.model.variant == Variant::kPlain ? 1.0 : 0.5;
  small.depth = 7;
  small.blocks = 2;
  small.growth_rate = 3;
  small.first_conv_channels = 4;
  small.input_channels = 2;
  small.input_height = 6;
  small.input_width = 6;
  small.num_classes = 3;
  for (auto& row : RunModelGradcheck(small, 3, cfg.train.seed)) {
    row.name = "model." + row.name;
    rows.push_back(row);
  }
  bool ok = true;
  std::cout << "# check\tinstances\tmax_relative_error\tstatus\n";
  for (const auto& row : rows) {
    const bool pass = row.max_error < kGradcheckTolerance;
    ok = ok && pass;
    std::cout << row.name << '\t' << row.instances << '\t' << std::scientific
              << std::setprecision(3) << row.max_error << std::defaultfloat << '\t'
              << (pass ? "ok" : "FAIL") << '\n';
  }
  return ok ? kOk : kFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DenseNet acoustic model toolkit"};
  app.require_subcommand(1);
  CommonOptions opts;
  bool machine = false;
  int instances = 10;

  auto* inspect = app.add_subcommand("inspect", "print the architecture table and parameter counts");
  inspect->add_flag("--machine", machine, "tab-separated output, one stage per line");
  auto* featurize = app.add_subcommand("featurize", "manifest of WAV files -> feature archive + normalization stats");
  auto* train = app.add_subcommand("train", "train on a feature archive, write the best checkpoint");
  auto* eval = app.add_subcommand("eval", "frame accuracy of a checkpoint on an archive");
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of every layer");
  gradcheck->add_option("--instances", instances, "random problems per layer")
      ->check(CLI::PositiveNumber);
  auto* synthdata = app.add_subcommand("synthdata", "write a synthetic labeled archive");
  for (auto* cmd : {inspect, featurize, train, eval, gradcheck, synthdata}) AddCommon(cmd, opts);
  featurize->footer("Paths: manifest, archive (written), stats (written).");
  train->footer(
      "Paths: train_archive, checkpoint (written); optional valid_archive, stats, "
      "metrics_log.\nWithout valid_archive a validation_fraction of the training "
      "utterances is held out.");
  eval->footer("Paths: checkpoint, eval_archive; optional stats.");
  synthdata->footer("Paths: archive (written). Keys: synth_frames, synth_separation, "
                    "synth_segment_frames, num_classes.");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    const RunConfig cfg = Resolve(opts);
    if (inspect->parsed()) return CmdInspect(cfg, machine);
    if (featurize->parsed()) return CmdFeaturize(cfg);
    if (train->parsed()) return CmdTrain(cfg);
    if (eval->parsed()) return CmdEval(cfg);
    if (gradcheck->parsed()) return CmdGradcheck(cfg, instances);
    if (synthdata->parsed()) return CmdSynthdata(cfg);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const InputError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kIo;
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return kIo;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kDiverged;
  } catch (const ShapeError& e) {
    std::cerr << "mismatch: " << e.what() << "\n";
    return kMismatch;
  } catch (const LabelError& e) {
    std::cerr << "mismatch: " << e.what() << "\n";
    return kMismatch;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kFailure;
}
