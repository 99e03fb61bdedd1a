// Copyright 2026 The fsbv Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fsbv/adam.hpp"
#include "fsbv/autograd.hpp"
#include "fsbv/tensor.hpp"

namespace fsbv {

struct RelationNetConfig {
  std::size_t input_channels = 1;
  std::size_t input_size = 128;
  std::size_t width = 64;   // channels of every conv block
  std::size_t hidden = 8;   // first fully connected layer

  std::size_t embedding_size() const { return input_size / 4; }
  std::size_t flatten_size() const { return width * (input_size / 16) * (input_size / 16); }
  /// Throws unless channels are 1 or 3 and the size is a positive multiple of 16.
  void validate() const;
  bool operator==(const RelationNetConfig&) const = default;
};

/// 3x3 conv (padding 1), batch norm, ReLU and an optional 2x2 max pool.
struct ConvBlock {
  Parameter kernel;
  Parameter bias;
  Parameter gamma;
  Parameter beta;
  RunningStats stats;
  bool pool = false;

  bool frozen() const { return kernel.frozen && bias.frozen && gamma.frozen && beta.frozen; }
};

enum class FreezePolicy { kNone, kEncoder, kAll };

struct RelationNetWeights {
  RelationNetConfig config;
  std::array<ConvBlock, 4> encoder;
  std::array<ConvBlock, 2> relation;
  Parameter fc1_weight, fc1_bias, fc2_weight, fc2_bias;

  /// He-normal kernels and zero biases; running stats start at mean 0, var 1.
  static RelationNetWeights Initialize(const RelationNetConfig& config, std::uint64_t seed);

  /// Every parameter in a fixed order (encoder first).
  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
  void apply_freeze(FreezePolicy policy);
  /// Rounds every parameter and running statistic to float precision.
  void quantize_to_float();

  bool operator==(const RelationNetWeights& other) const;
};

FreezePolicy ParseFreezePolicy(const std::string& name);

// --- graph builders ---

/// [N,C,S,S] images -> [N,width,S/4,S/4] embeddings. Fully frozen blocks run in eval mode.
Var EncodeGraph(Tape& tape, RelationNetWeights& weights, Var images, Mode mode);

/// Relation scores [P,1] for pairs (sample index, query index). The first
/// conv of the relation module is split over the two concatenated halves,
/// so each embedding is convolved once instead of once per pair.
Var RelationGraph(Tape& tape, RelationNetWeights& weights, Var sample_embeddings,
                  Var query_embeddings,
                  const std::vector<std::pair<std::size_t, std::size_t>>& pairs, Mode mode);

/// Relation scores [P,1] from already concatenated pair tensors [P,2*width,E,E].
Var RelationGraphConcat(Tape& tape, RelationNetWeights& weights, Var pairs, Mode mode);

// --- eager inference (eval mode) ---

Tensor StackImages(const std::vector<const Tensor*>& images);

/// [C,S,S] -> [width,S/4,S/4].
Tensor encode(const RelationNetWeights& weights, const Tensor& image);
/// [N,C,S,S] -> [N,width,S/4,S/4].
Tensor encode_batch(const RelationNetWeights& weights, const Tensor& images);
/// Channel-axis concatenation, sample first.
Tensor concat_pair(const Tensor& sample_embedding, const Tensor& query_embedding);
/// Score in (0, 1) for one [2*width,E,E] pair tensor.
double relation_score(const RelationNetWeights& weights, const Tensor& pair);
/// Scores for every sample of `samples` [m,...] against one query embedding [width,E,E].
std::vector<double> relation_scores(const RelationNetWeights& weights, const Tensor& samples,
                                    const Tensor& query);

// --- episodes ---

/// Images of one subject, already normalized to network input.
struct SubjectImages {
  std::string id;
  std::vector<Tensor> genuine;
  std::vector<Tensor> forged;
};

struct ImageRef {
  std::size_t subject = 0;
  std::size_t index = 0;
  bool operator==(const ImageRef&) const = default;
};

/// C-way K-shot episode with N queries per class. Each query is paired with
/// every sample, which gives n * C pairs for K = 1.
struct Episode {
  std::size_t way = 0, shot = 0, queries = 0;
  std::uint64_t seed = 0;
  std::vector<std::size_t> classes;
  std::vector<ImageRef> samples;       // grouped by episode class
  std::vector<ImageRef> query_set;     // grouped by episode class
  std::vector<std::size_t> sample_labels, query_labels;
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (sample, query)
  std::vector<double> targets;         // 1 for matching classes

  std::size_t embedding_count() const { return samples.size() + query_set.size(); }
  bool operator==(const Episode&) const = default;
};

Episode build_episode(const std::vector<SubjectImages>& subjects, std::size_t way,
                      std::size_t shot, std::size_t queries, std::uint64_t seed);

/// One optimizer step on the episode's MSE loss; returns the loss before the step.
double train_episode(RelationNetWeights& weights, Adam& optimizer,
                     const std::vector<SubjectImages>& subjects, const Episode& episode);

/// Loss of the episode under the given mode without updating anything but
/// (in train mode) batch-norm statistics.
double episode_loss(RelationNetWeights& weights, const std::vector<SubjectImages>& subjects,
                    const Episode& episode, Mode mode);

// --- validation ---

/// One verification trial: supports from a subject's genuine images and a
/// query that is genuine with probability 1/2.
struct Trial {
  std::size_t subject = 0;
  std::vector<std::size_t> supports;
  ImageRef query;
  bool query_forged = false;
  bool genuine = false;
};

/// Impostor queries come from the subject's forgeries when it has any,
/// otherwise from another subject.
std::vector<Trial> build_trials(const std::vector<SubjectImages>& subjects, std::size_t count,
                                std::size_t shot, std::uint64_t seed);

/// Fraction of trials where (max relation score > threshold) matches the truth.
double cross_validate(const RelationNetWeights& weights,
                      const std::vector<SubjectImages>& subjects, const std::vector<Trial>& trials,
                      double threshold = 0.5);

struct CheckpointLog {
  std::size_t episode = 0;
  double accuracy = 0.0;
};

/// Keeps the highest-accuracy checkpoint; ties keep the earlier one.
class CheckpointSelector {
 public:
  /// Returns true when the offered weights became the new best.
  bool offer(std::size_t episode, double accuracy, const RelationNetWeights& weights);

  bool has_best() const { return best_.has_value(); }
  const RelationNetWeights& best() const { return *best_; }
  double best_accuracy() const { return best_accuracy_; }
  std::size_t best_episode() const { return best_episode_; }
  const std::vector<CheckpointLog>& history() const { return history_; }

 private:
  std::optional<RelationNetWeights> best_;
  double best_accuracy_ = -1.0;
  std::size_t best_episode_ = 0;
  std::vector<CheckpointLog> history_;
};

// --- training loops ---

struct ProgressRecord {
  std::size_t episode = 0;  // 1-based count of completed episodes
  double loss = 0.0;
  std::optional<double> validation_accuracy;
};

using ProgressFn = std::function<void(const ProgressRecord&)>;

struct TrainOptions {
  std::size_t episodes = 10000;
  std::size_t way = 5;
  std::size_t shot = 1;
  std::size_t queries = 5;
  std::uint64_t seed = 0;
  AdamOptions adam;
  std::size_t halve_lr_every = 2500;
  std::size_t validate_every = 10;
  std::size_t validation_trials = 40;
  std::size_t validation_shot = 1;
};

struct TrainReport {
  std::vector<double> losses;
  std::vector<CheckpointLog> validations;
  std::optional<CheckpointLog> best;
};

/// Episodic training. With a non-empty validation split the weights end as
/// the best cross-validated checkpoint.
TrainReport train_relation_net(RelationNetWeights& weights,
                               const std::vector<SubjectImages>& train,
                               const std::vector<SubjectImages>& validation,
                               const TrainOptions& options, const ProgressFn& progress = {});

struct FinetuneOptions {
  std::size_t episodes = 1000;
  std::size_t way = 5;
  std::size_t shot = 5;
  std::size_t queries = 6;
  std::uint64_t seed = 0;
  FreezePolicy freeze = FreezePolicy::kEncoder;
  AdamOptions adam;
  std::size_t halve_lr_every = 2500;
  std::size_t validate_every = 10;
  std::size_t validation_trials = 40;
};

/// Each episode draws `way` subjects that have forgeries (fewer if not
/// enough exist). Per subject, `shot` genuine supports are paired with
/// `queries` queries of the same subject, half forgeries and half from its
/// remaining genuine images (fewer if the pools run short). Target 1 for
/// genuine, 0 for forged. All pairs form one batch-norm batch.
TrainReport finetune_forgery(RelationNetWeights& weights,
                             const std::vector<SubjectImages>& subjects,
                             const std::vector<SubjectImages>& validation,
                             const FinetuneOptions& options, const ProgressFn& progress = {});

}  // namespace fsbv
