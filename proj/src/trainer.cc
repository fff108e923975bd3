// src/trainer.cc

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

#include "densenet/trainer.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "densenet/keyvalue.h"

namespace densenet {

void TrainConfig::Validate() const {
  auto fail = [](const std::string& key, const std::string& why) {
    throw ConfigError("invalid '" + key + "': " + why);
  };
  if (!(initial_lr > 0)) fail("learning_rate", "must be positive");
  if (batch_size < 1) fail("batch_size", "must be >= 1");
  if (max_epochs < 1) fail("max_epochs", "must be >= 1");
  if (!(momentum >= 0 && momentum < 1)) fail("momentum", "must lie in [0, 1)");
  if (!(schedule.halving_factor > 0 && schedule.halving_factor < 1))
    fail("halving_factor", "must lie in (0, 1)");
  if (!(schedule.threshold >= 0)) fail("improvement_threshold", "must be >= 0");
  if (!(schedule.min_lr > 0)) fail("min_learning_rate", "must be positive");
  if (!(validation_fraction > 0 && validation_fraction < 1))
    fail("validation_fraction", "must lie in (0, 1)");
  if (context_left < 0) fail("context_left", "must be >= 0");
  if (context_right < 0) fail("context_right", "must be >= 0");
}

const std::vector<std::string>& TrainConfigKeys() {
  static const std::vector<std::string> keys = {
      "learning_rate", "batch_size",        "max_epochs",   "momentum",
      "halving_factor", "improvement_threshold", "min_learning_rate",
      "seed",          "deterministic",     "validation_fraction",
      "context_left",  "context_right"};
  return keys;
}

std::map<std::string, std::string> TrainConfig::ToKeyValues() const {
  return {{"learning_rate", FormatDouble(initial_lr)},
          {"batch_size", std::to_string(batch_size)},
          {"max_epochs", std::to_string(max_epochs)},
          {"momentum", FormatDouble(momentum)},
          {"halving_factor", FormatDouble(schedule.halving_factor)},
          {"improvement_threshold", FormatDouble(schedule.threshold)},
          {"min_learning_rate", FormatDouble(schedule.min_lr)},
          {"seed", std::to_string(seed)},
          {"deterministic", deterministic ? "true" : "false"},
          {"validation_fraction", FormatDouble(validation_fraction)},
          {"context_left", std::to_string(context_left)},
          {"context_right", std::to_string(context_right)}};
}

bool TrainConfig::Set(const std::string& key, const std::string& value) {
  if (key == "learning_rate") initial_lr = ParseDouble(key, value);
  else if (key == "batch_size") batch_size = ParseInt(key, value);
  else if (key == "max_epochs") max_epochs = ParseInt(key, value);
  else if (key == "momentum") momentum = ParseDouble(key, value);
  else if (key == "halving_factor") schedule.halving_factor = ParseDouble(key, value);
  else if (key == "improvement_threshold") schedule.threshold = ParseDouble(key, value);
  else if (key == "min_learning_rate") schedule.min_lr = ParseDouble(key, value);
  else if (key == "seed") seed = ParseUint64(key, value);
  else if (key == "deterministic") deterministic = ParseBool(key, value);
  else if (key == "validation_fraction") validation_fraction = ParseDouble(key, value);
  else if (key == "context_left") context_left = ParseInt(key, value);
  else if (key == "context_right") context_right = ParseInt(key, value);
  else return false;
  return true;
}

ScheduleState ScheduleState::Initial(const TrainConfig& cfg) {
  ScheduleState s;
  s.lr = cfg.initial_lr;
  return s;
}

ScheduleDecision ScheduleStep(const ScheduleState& state, double val_metric,
                              const TrainConfig& cfg) {
  ScheduleDecision d;
  d.state = state;
  ScheduleState& s = d.state;
  s.epoch += 1;
  double improvement = std::numeric_limits<double>::infinity();
  if (state.best) {
    const double best = *state.best;
    improvement = (best - val_metric) / std::max(std::abs(best), 1e-12);
  }
  d.improved = !state.best || val_metric < *state.best;
  if (d.improved) {
    s.best = val_metric;
    s.epochs_since_improvement = 0;
  } else {
    s.epochs_since_improvement += 1;
  }

  const bool stalled = !(improvement >= cfg.schedule.threshold);
  if (s.halving && stalled) {
    d.stop = true;
    d.reason = "validation improvement below threshold while halving";
  } else {
    if (stalled) s.halving = true;
    if (s.halving) s.lr *= cfg.schedule.halving_factor;
    if (s.lr < cfg.schedule.min_lr) {
      d.stop = true;
      d.reason = "learning rate below minimum";
    }
  }
  if (!d.stop && s.epoch >= cfg.max_epochs) {
    d.stop = true;
    d.reason = "epoch budget exhausted";
  }
  return d;
}

void SgdUpdate(Tensor<float>& param, const Tensor<float>& grad,
               Tensor<float>& velocity, double lr, double momentum) {
  if (grad.shape() != param.shape() || velocity.shape() != param.shape())
    throw ShapeError("sgd update: parameter " + ShapeString(param.shape()) +
                     ", gradient " + ShapeString(grad.shape()) + ", velocity " +
                     ShapeString(velocity.shape()));
  const auto m = static_cast<float>(momentum);
  const auto rate = static_cast<float>(lr);
  for (std::size_t i = 0; i < param.size(); ++i) {
    velocity[i] = m * velocity[i] - rate * grad[i];
    param[i] += velocity[i];
  }
}

void SgdOptimizer::Step(Model<float>& model, double lr) {
  std::size_t i = 0;
  model.ForEachParameter([&](const ParameterRef<float>& p) {
    if (!p.grad) return;
    if (i == velocities_.size()) velocities_.emplace_back(p.value->shape());
    SgdUpdate(*p.value, *p.grad, velocities_[i], lr, momentum_);
    ++i;
  });
}

Tensor<float> FrameDataset::Gather(std::span<const std::size_t> indices,
                                   std::vector<int>* batch_labels) const {
  const std::size_t n = sample_size();
  Tensor<float> batch({static_cast<int>(indices.size()), channels, height, width});
  if (batch_labels) batch_labels->clear();
  float* dst = batch.data().data();
  for (std::size_t idx : indices) {
    dst = std::copy_n(inputs.data() + idx * n, n, dst);
    if (batch_labels) batch_labels->push_back(labels[idx]);
  }
  return batch;
}

FrameDataset MakeFrameDataset(std::span<const UtteranceFeatures> utts, int left,
                              int right) {
  FrameDataset data;
  for (const auto& utt : utts) {
    utt.Validate();
    if (!utt.labels)
      throw InputError("utterance '" + utt.id + "' has no frame labels");
    const Tensor<float> spliced = SpliceContext(utt.frames, left, right);
    if (data.labels.empty()) {
      data.channels = spliced.dim(1);
      data.height = spliced.dim(2);
      data.width = spliced.dim(3);
    } else if (spliced.dim(1) != data.channels || spliced.dim(3) != data.width) {
      throw ShapeError("utterance '" + utt.id + "' has geometry " +
                       ShapeString(utt.frames.shape()) + ", earlier ones have " +
                       std::to_string(data.channels) + " channels x " +
                       std::to_string(data.width) + " bins");
    }
    data.inputs.insert(data.inputs.end(), spliced.data().begin(), spliced.data().end());
    data.labels.insert(data.labels.end(), utt.labels->begin(), utt.labels->end());
  }
  return data;
}

namespace {

void CheckGeometry(const Model<float>& model, const FrameDataset& data) {
  const auto& c = model.config();
  if (data.channels != c.input_channels || data.height != c.input_height ||
      data.width != c.input_width)
    throw ShapeError("data frames are " + std::to_string(data.channels) + "x" +
                     std::to_string(data.height) + "x" + std::to_string(data.width) +
                     ", model expects " + std::to_string(c.input_channels) + "x" +
                     std::to_string(c.input_height) + "x" +
                     std::to_string(c.input_width));
  for (int label : data.labels)
    if (label < 0 || label >= c.num_classes)
      throw LabelError("label " + std::to_string(label) + " outside [0, " +
                       std::to_string(c.num_classes) + ")");
}

int Argmax(const float* row, int n) {
  return static_cast<int>(std::max_element(row, row + n) - row);
}

// Batch boundaries over n samples; a single trailing sample joins the
// previous batch.
std::vector<std::size_t> BatchStarts(std::size_t n, int batch_size) {
  std::vector<std::size_t> starts;
  for (std::size_t s = 0; s < n; s += batch_size) starts.push_back(s);
  if (starts.size() > 1 && n - starts.back() == 1) starts.pop_back();
  starts.push_back(n);
  return starts;
}

}  // namespace

EpochStats TrainEpoch(Model<float>& model, SgdOptimizer& optimizer,
                      const FrameDataset& data, int batch_size, double lr,
                      std::mt19937_64& rng) {
  if (data.size() == 0) throw InputError("training set is empty");
  if (batch_size < 1) throw ConfigError("invalid 'batch_size': must be >= 1");
  CheckGeometry(model, data);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);

  EpochStats stats;
  double loss_sum = 0;
  std::size_t correct = 0;
  std::vector<int> labels;
  ForwardTrace<float> trace;
  const auto starts = BatchStarts(order.size(), batch_size);
  for (std::size_t b = 0; b + 1 < starts.size(); ++b) {
    std::span<const std::size_t> idx(order.data() + starts[b], starts[b + 1] - starts[b]);
    const Tensor<float> x = data.Gather(idx, &labels);
    const Tensor<float> logits = model.Forward(x, Mode::kTrain, &trace);
    const auto loss = SoftmaxCrossEntropy(logits, std::span<const int>(labels));
    if (!std::isfinite(loss.loss))
      throw NumericError("training diverged: non-finite loss in batch " + std::to_string(b));
    model.Backward(trace, loss.grad);
    optimizer.Step(model, lr);
    loss_sum += loss.loss * static_cast<double>(idx.size());
    const int classes = logits.dim(1);
    for (std::size_t i = 0; i < idx.size(); ++i)
      if (Argmax(logits.data().data() + i * classes, classes) == labels[i]) ++correct;
    stats.batches += 1;
  }
  stats.frames = data.size();
  stats.loss = loss_sum / static_cast<double>(data.size());
  stats.accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
  return stats;
}

EvalResult Evaluate(const Model<float>& model, const FrameDataset& data, int batch_size) {
  if (data.size() == 0) throw InputError("evaluation set is empty");
  if (batch_size < 1) throw ConfigError("invalid 'batch_size': must be >= 1");
  CheckGeometry(model, data);
  EvalResult r;
  r.num_classes = model.config().num_classes;
  r.confusion.assign(static_cast<std::size_t>(r.num_classes) * r.num_classes, 0);
  double loss_sum = 0;
  std::vector<std::size_t> idx;
  std::vector<int> labels;
  for (std::size_t start = 0; start < data.size(); start += batch_size) {
    const std::size_t end = std::min(data.size(), start + batch_size);
    idx.resize(end - start);
    std::iota(idx.begin(), idx.end(), start);
    const Tensor<float> logits = model.Infer(data.Gather(idx, &labels));
    const auto loss = SoftmaxCrossEntropy(logits, std::span<const int>(labels));
    loss_sum += loss.loss * static_cast<double>(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const int pred = Argmax(logits.data().data() + i * r.num_classes, r.num_classes);
      r.confusion[static_cast<std::size_t>(labels[i]) * r.num_classes + pred] += 1;
      if (pred == labels[i]) ++r.correct;
    }
  }
  r.total = data.size();
  r.loss = loss_sum / static_cast<double>(r.total);
  r.accuracy = static_cast<double>(r.correct) / static_cast<double>(r.total);
  return r;
}

std::string FormatMetricsLine(const EpochMetrics& m) {
  return "epoch=" + std::to_string(m.epoch) + " lr=" + FormatDouble(m.lr) +
         " train_loss=" + FormatDouble(m.train_loss) +
         " train_acc=" + FormatDouble(m.train_accuracy) +
         " val_loss=" + FormatDouble(m.val_loss) +
         " val_acc=" + FormatDouble(m.val_accuracy) +
         " seconds=" + FormatDouble(m.seconds);
}

EpochMetrics ParseMetricsLine(const std::string& line) {
  static const char* const kFields[] = {"epoch",   "lr",      "train_loss", "train_acc",
                                        "val_loss", "val_acc", "seconds"};
  std::istringstream in(line);
  EpochMetrics m;
  double* slots[] = {nullptr, &m.lr, &m.train_loss, &m.train_accuracy,
                     &m.val_loss, &m.val_accuracy, &m.seconds};
  for (int i = 0; i < 7; ++i) {
    std::string tok;
    if (!(in >> tok)) throw FormatError("metrics line ends before field '" + std::string(kFields[i]) + "'");
    const auto eq = tok.find('=');
    if (eq == std::string::npos || tok.substr(0, eq) != kFields[i])
      throw FormatError("metrics line: expected field '" + std::string(kFields[i]) + "', got '" + tok + "'");
    const std::string value = tok.substr(eq + 1);
    try {
      if (i == 0) m.epoch = ParseInt(kFields[i], value);
      else *slots[i] = ParseDouble(kFields[i], value);
    } catch (const ConfigError& e) {
      throw FormatError(std::string("metrics line: ") + e.what());
    }
  }
  if (std::string extra; in >> extra) throw FormatError("metrics line has trailing '" + extra + "'");
  return m;
}

TrainResult Train(Model<float> model, const FrameDataset& train,
                  const FrameDataset& valid, const TrainConfig& cfg, std::ostream* log) {
  cfg.Validate();
  CheckGeometry(model, valid);
  TrainResult result;
  result.best = model;
  SgdOptimizer optimizer(cfg.momentum);
  ScheduleState state = ScheduleState::Initial(cfg);
  while (true) {
    const auto t0 = std::chrono::steady_clock::now();
    std::seed_seq seq{cfg.seed, static_cast<std::uint64_t>(state.epoch)};
    std::mt19937_64 rng(seq);
    EpochMetrics m;
    m.epoch = state.epoch + 1;
    m.lr = state.lr;
    const EpochStats ts = TrainEpoch(model, optimizer, train, cfg.batch_size, state.lr, rng);
    const EvalResult vs = Evaluate(model, valid, cfg.batch_size);
    if (!std::isfinite(vs.loss))
      throw NumericError("validation loss is not finite after epoch " + std::to_string(m.epoch));
    m.train_loss = ts.loss;
    m.train_accuracy = ts.accuracy;
    m.val_loss = vs.loss;
    m.val_accuracy = vs.accuracy;
    m.seconds = cfg.deterministic
                    ? 0.0
                    : std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.history.push_back(m);
    if (log) *log << FormatMetricsLine(m) << '\n' << std::flush;

    const ScheduleDecision d = ScheduleStep(state, vs.loss, cfg);
    if (d.improved) {
      result.best = model;
      result.best_epoch = m.epoch;
    }
    state = d.state;
    if (d.stop) {
      result.stop_reason = d.reason;
      break;
    }
  }
  return result;
}

std::pair<std::vector<UtteranceFeatures>, std::vector<UtteranceFeatures>>
SplitValidation(std::vector<UtteranceFeatures> utts, double fraction, std::uint64_t seed) {
  if (!(fraction > 0 && fraction < 1))
    throw ConfigError("invalid 'validation_fraction': must lie in (0, 1)");
  if (utts.size() < 2)
    throw InputError("need at least 2 training utterances to hold out a validation set");
  std::vector<std::size_t> order(utts.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto held = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::lround(fraction * static_cast<double>(utts.size()))), 1,
      utts.size() - 1);
  std::vector<bool> is_held(utts.size(), false);
  for (std::size_t i = 0; i < held; ++i) is_held[order[i]] = true;
  std::vector<UtteranceFeatures> train, valid;
  for (std::size_t i = 0; i < utts.size(); ++i)
    (is_held[i] ? valid : train).push_back(std::move(utts[i]));
  return {std::move(train), std::move(valid)};
}

std::vector<double> SyntheticClassMean(const SyntheticSpec& spec, int c) {
  int radix = 1;
  auto capacity = [&](int r) {
    long long cap = 1;
    for (int i = 0; i < spec.channels && cap < spec.num_classes; ++i) cap *= r;
    return cap;
  };
  while (capacity(radix) < spec.num_classes) ++radix;
  std::vector<double> mean(spec.channels);
  int rest = c;
  for (int ch = 0; ch < spec.channels; ++ch) {
    mean[ch] = spec.separation * ((rest % radix) - (radix - 1) / 2.0);
    rest /= radix;
  }
  return mean;
}

FeatureArchive MakeSyntheticDataset(const SyntheticSpec& spec) {
  auto fail = [](const std::string& key, const std::string& why) {
    throw ConfigError("invalid '" + key + "': " + why);
  };
  if (spec.num_classes < 2) fail("num_classes", "must be >= 2");
  if (spec.frames < 1) fail("synth_frames", "must be >= 1");
  if (!(spec.separation >= 0)) fail("synth_separation", "must be >= 0");
  if (spec.segment_frames < 1) fail("synth_segment_frames", "must be >= 1");
  if (spec.channels < 1) fail("input_channels", "must be >= 1");
  if (spec.bins < 1) fail("input_width", "must be >= 1");

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  FeatureArchive archive;
  archive.metadata = "synthetic=1\nnum_classes=" + std::to_string(spec.num_classes) +
                     "\nframes=" + std::to_string(spec.frames) +
                     "\nseparation=" + FormatDouble(spec.separation) +
                     "\nseed=" + std::to_string(spec.seed) + "\n";
  for (int c = 0; c < spec.num_classes; ++c) {
    const int count = spec.frames / spec.num_classes + (c < spec.frames % spec.num_classes ? 1 : 0);
    const std::vector<double> mean = SyntheticClassMean(spec, c);
    for (int start = 0, seg = 0; start < count; start += spec.segment_frames, ++seg) {
      const int T = std::min(spec.segment_frames, count - start);
      UtteranceFeatures utt;
      utt.id = "class" + std::to_string(c) + "_seg" + std::to_string(seg);
      utt.frames = Tensor<float>({T, spec.channels, spec.bins});
      std::size_t i = 0;
      for (int t = 0; t < T; ++t)
        for (int ch = 0; ch < spec.channels; ++ch)
          for (int b = 0; b < spec.bins; ++b)
            utt.frames[i++] = static_cast<float>(mean[ch] + noise(rng));
      utt.labels = std::vector<int>(T, c);
      archive.utterances.push_back(std::move(utt));
    }
  }
  return archive;
}

}  // namespace densenet
