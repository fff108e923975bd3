// include/densenet/trainer.h

// Copyright 2026  The densenet-am authors

// See ../../COPYING for clarification regarding multiple authors
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

#ifndef DENSENET_TRAINER_H_
#define DENSENET_TRAINER_H_

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "densenet/archive.h"
#include "densenet/model.h"

namespace densenet {

/// Improvement-gated halving ("newbob"). Once the relative validation
/// improvement drops below `threshold` the learning rate is multiplied by
/// `halving_factor` every epoch; a second stall while halving stops training.
struct ScheduleOptions {
  double halving_factor = 0.5;
  double threshold = 0.002;
  double min_lr = 1e-5;
};

struct TrainConfig {
  double initial_lr = 0.01;
  int batch_size = 256;
  int max_epochs = 20;
  ScheduleOptions schedule;
  double momentum = 0.9;
  std::uint64_t seed = 1;
  bool deterministic = false;
  double validation_fraction = 0.05;  // used when no validation set is given
  int context_left = 5;
  int context_right = 5;

  void Validate() const;
  std::map<std::string, std::string> ToKeyValues() const;
  bool Set(const std::string& key, const std::string& value);
};

const std::vector<std::string>& TrainConfigKeys();

struct ScheduleState {
  double lr = 0.01;
  std::optional<double> best;  // lowest validation loss so far
  int epochs_since_improvement = 0;
  bool halving = false;
  int epoch = 0;  // completed epochs

  static ScheduleState Initial(const TrainConfig& cfg);
};

struct ScheduleDecision {
  ScheduleState state;  // lr to use for the next epoch
  bool stop = false;
  bool improved = false;  // val_metric is a new best
  std::string reason;     // why training stops, empty otherwise
};

/// Feeds one epoch's validation loss (lower is better) into the schedule.
ScheduleDecision ScheduleStep(const ScheduleState& state, double val_metric,
                              const TrainConfig& cfg);

/// velocity = momentum * velocity - lr * grad; param += velocity.
void SgdUpdate(Tensor<float>& param, const Tensor<float>& grad,
               Tensor<float>& velocity, double lr, double momentum);

/// Holds one velocity per trainable tensor of a model.
class SgdOptimizer {
 public:
  explicit SgdOptimizer(double momentum) : momentum_(momentum) {}
  void Step(Model<float>& model, double lr);
  const std::vector<Tensor<float>>& velocities() const { return velocities_; }

 private:
  double momentum_;
  std::vector<Tensor<float>> velocities_;
};

/// Spliced frames ready for minibatching: N samples of channels x height x
/// width with one label each.
struct FrameDataset {
  int channels = 0, height = 0, width = 0;
  std::vector<float> inputs;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  std::size_t sample_size() const {
    return static_cast<std::size_t>(channels) * height * width;
  }
  /// Gathers the listed samples into an N x C x H x W tensor.
  Tensor<float> Gather(std::span<const std::size_t> indices,
                       std::vector<int>* batch_labels) const;
};

/// Splices every utterance with the given context. Throws InputError if an
/// utterance has no labels.
FrameDataset MakeFrameDataset(std::span<const UtteranceFeatures> utts, int left,
                              int right);

struct EpochStats {
  double loss = 0;
  double accuracy = 0;
  std::size_t frames = 0;
  int batches = 0;
};

/// One pass over `data` in an order shuffled with `rng`. The final short
/// batch is used; a lone trailing frame is folded into the batch before it
/// because batch statistics of a single 1x1 map are undefined.
EpochStats TrainEpoch(Model<float>& model, SgdOptimizer& optimizer,
                      const FrameDataset& data, int batch_size, double lr,
                      std::mt19937_64& rng);

struct EvalResult {
  double loss = 0;
  double accuracy = 0;
  std::size_t correct = 0;
  std::size_t total = 0;
  int num_classes = 0;
  std::vector<std::int64_t> confusion;  // [label * classes + predicted]

  std::int64_t count(int label, int predicted) const {
    return confusion[static_cast<std::size_t>(label) * num_classes + predicted];
  }
};

/// Infer-mode pass; the model is not modified.
EvalResult Evaluate(const Model<float>& model, const FrameDataset& data,
                    int batch_size = 256);

struct EpochMetrics {
  int epoch = 0;
  double lr = 0;
  double train_loss = 0, train_accuracy = 0;
  double val_loss = 0, val_accuracy = 0;
  double seconds = 0;
};

/// "epoch=E lr=.. train_loss=.. train_acc=.. val_loss=.. val_acc=.. seconds=.."
std::string FormatMetricsLine(const EpochMetrics& m);
EpochMetrics ParseMetricsLine(const std::string& line);

struct TrainResult {
  Model<float> best;  // parameters with the lowest validation loss
  int best_epoch = 0;
  std::vector<EpochMetrics> history;
  std::string stop_reason;
};

/// Full schedule-driven run. Each epoch's metrics line goes to `log` as soon
/// as the epoch finishes. Deterministic mode records 0 seconds so logs
/// compare byte for byte.
TrainResult Train(Model<float> model, const FrameDataset& train,
                  const FrameDataset& valid, const TrainConfig& cfg,
                  std::ostream* log = nullptr);

/// Seeded utterance-level split: returns {train, held out}. At least one
/// utterance is held out when there are two or more.
std::pair<std::vector<UtteranceFeatures>, std::vector<UtteranceFeatures>>
SplitValidation(std::vector<UtteranceFeatures> utts, double fraction,
                std::uint64_t seed);

struct SyntheticSpec {
  int num_classes = 10;
  int frames = 64;          // total, assigned to classes round robin
  double separation = 5.0;  // distance between neighbouring class means
  std::uint64_t seed = 1;
  int segment_frames = 8;   // frames per single-class utterance
  int channels = 3;
  int bins = 40;
};

/// Class-conditional Gaussian features with unit noise. Class means are
/// constant per channel and sit on a centered integer grid scaled by
/// `separation`, so the closest pair of classes differs by exactly
/// `separation` per coefficient in one channel. Utterances are T x channels x
/// bins and become class-conditional channels x (l+1+r) x bins tensors after
/// splicing.
FeatureArchive MakeSyntheticDataset(const SyntheticSpec& spec);

/// Mean vector of class `c` for the given spec, one value per channel.
std::vector<double> SyntheticClassMean(const SyntheticSpec& spec, int c);

}  // namespace densenet

#endif  // DENSENET_TRAINER_H_
