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

#include "fsbv/relation_net.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "fsbv/error.hpp"
#include "fsbv/rng.hpp"

namespace fsbv {
namespace {

// Eager inference chunk; bounds the memory held by one tape.
constexpr std::size_t kEncodeChunk = 8;

Parameter MakeParameter(std::string name, Shape shape, double fill) {
  Parameter p;
  p.name = std::move(name);
  p.value = Tensor(std::move(shape), fill);
  return p;
}

Parameter HeNormal(std::string name, Shape shape, std::size_t fan_in, Rng& rng) {
  Parameter p = MakeParameter(std::move(name), std::move(shape), 0.0);
  const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
  for (std::size_t i = 0; i < p.value.size(); ++i) p.value[i] = rng.normal(0.0, stddev);
  return p;
}

ConvBlock MakeBlock(const std::string& prefix, std::size_t in, std::size_t out, bool pool,
                    Rng& rng) {
  ConvBlock b;
  b.kernel = HeNormal(prefix + ".conv.weight", Shape{out, in, 3, 3}, in * 9, rng);
  b.bias = MakeParameter(prefix + ".conv.bias", Shape{out}, 0.0);
  b.gamma = MakeParameter(prefix + ".bn.weight", Shape{out}, 1.0);
  b.beta = MakeParameter(prefix + ".bn.bias", Shape{out}, 0.0);
  b.stats.mean = Tensor(Shape{out}, 0.0);
  b.stats.var = Tensor(Shape{out}, 1.0);
  b.pool = pool;
  return b;
}

Var Normalize(Tape& tape, ConvBlock& b, Var x, Mode mode) {
  const Mode m = b.frozen() ? Mode::kEval : mode;
  Var y = ag::batch_norm2d(tape, x, tape.parameter(b.gamma), tape.parameter(b.beta), m, b.stats);
  y = ag::relu(tape, y);
  return b.pool ? ag::max_pool2d(tape, y) : y;
}

Var BlockGraph(Tape& tape, ConvBlock& b, Var x, Mode mode) {
  Var y = ag::conv2d(tape, x, tape.parameter(b.kernel), tape.parameter(b.bias), 1);
  return Normalize(tape, b, y, mode);
}

Var HeadGraph(Tape& tape, RelationNetWeights& w, Var x, Mode mode) {
  Var y = BlockGraph(tape, w.relation[1], x, mode);
  y = ag::flatten(tape, y);
  y = ag::linear(tape, y, tape.parameter(w.fc1_weight), tape.parameter(w.fc1_bias));
  y = ag::relu(tape, y);
  y = ag::linear(tape, y, tape.parameter(w.fc2_weight), tape.parameter(w.fc2_bias));
  return ag::sigmoid(tape, y);
}

// Eager inference runs in eval mode, which only reads parameters and
// statistics; the graph builders take mutable references for training.
RelationNetWeights& Mutable(const RelationNetWeights& w) {
  return const_cast<RelationNetWeights&>(w);
}

const Tensor& Image(const std::vector<SubjectImages>& subjects, const ImageRef& ref,
                    bool forged = false) {
  const SubjectImages& s = subjects.at(ref.subject);
  return forged ? s.forged.at(ref.index) : s.genuine.at(ref.index);
}

Tensor Slice0(const Tensor& batch, std::size_t begin, std::size_t end) {
  Shape shape = batch.shape();
  const std::size_t item = batch.size() / shape[0];
  shape[0] = end - begin;
  const auto src = batch.data();
  return Tensor(shape, std::vector<double>(src.begin() + static_cast<std::ptrdiff_t>(begin * item),
                                           src.begin() + static_cast<std::ptrdiff_t>(end * item)));
}

double LearningRate(double base, std::size_t episode, std::size_t halve_every) {
  if (halve_every == 0) return base;
  return base * std::pow(0.5, static_cast<double>(episode / halve_every));
}

}  // namespace

void RelationNetConfig::validate() const {
  if (input_channels != 1 && input_channels != 3) {
    Fail(ErrorKind::kInvalidArgument, "relation net: input channels must be 1 or 3");
  }
  if (input_size == 0 || input_size % 16 != 0) {
    Fail(ErrorKind::kInvalidArgument, "relation net: input size must be a positive multiple of 16");
  }
  if (width == 0 || hidden == 0) {
    Fail(ErrorKind::kInvalidArgument, "relation net: width and hidden size must be positive");
  }
}

RelationNetWeights RelationNetWeights::Initialize(const RelationNetConfig& config,
                                                  std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  RelationNetWeights w;
  w.config = config;
  for (std::size_t i = 0; i < 4; ++i) {
    const std::size_t in = i == 0 ? config.input_channels : config.width;
    w.encoder[i] = MakeBlock("encoder." + std::to_string(i), in, config.width, i < 2, rng);
  }
  w.relation[0] = MakeBlock("relation.0", 2 * config.width, config.width, true, rng);
  w.relation[1] = MakeBlock("relation.1", config.width, config.width, true, rng);
  const std::size_t flat = config.flatten_size();
  w.fc1_weight = HeNormal("relation.fc1.weight", Shape{config.hidden, flat}, flat, rng);
  w.fc1_bias = MakeParameter("relation.fc1.bias", Shape{config.hidden}, 0.0);
  w.fc2_weight = HeNormal("relation.fc2.weight", Shape{1, config.hidden}, config.hidden, rng);
  w.fc2_bias = MakeParameter("relation.fc2.bias", Shape{1}, 0.0);
  return w;
}

std::vector<Parameter*> RelationNetWeights::parameters() {
  std::vector<Parameter*> out;
  auto add_block = [&](ConvBlock& b) {
    out.insert(out.end(), {&b.kernel, &b.bias, &b.gamma, &b.beta});
  };
  for (ConvBlock& b : encoder) add_block(b);
  for (ConvBlock& b : relation) add_block(b);
  out.insert(out.end(), {&fc1_weight, &fc1_bias, &fc2_weight, &fc2_bias});
  return out;
}

std::vector<const Parameter*> RelationNetWeights::parameters() const {
  std::vector<const Parameter*> out;
  for (Parameter* p : Mutable(*this).parameters()) out.push_back(p);
  return out;
}

void RelationNetWeights::apply_freeze(FreezePolicy policy) {
  std::size_t index = 0;
  for (Parameter* p : parameters()) {
    const bool in_encoder = index++ < 16;
    p->frozen = policy == FreezePolicy::kAll || (policy == FreezePolicy::kEncoder && in_encoder);
  }
}

void RelationNetWeights::quantize_to_float() {
  auto round = [](Tensor& t) {
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<double>(static_cast<float>(t[i]));
  };
  for (Parameter* p : parameters()) round(p->value);
  for (ConvBlock* b : {&encoder[0], &encoder[1], &encoder[2], &encoder[3], &relation[0],
                       &relation[1]}) {
    round(b->stats.mean);
    round(b->stats.var);
  }
}

bool RelationNetWeights::operator==(const RelationNetWeights& other) const {
  if (!(config == other.config)) return false;
  const auto a = parameters(), b = other.parameters();
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!(a[i]->value == b[i]->value)) return false;
  }
  for (std::size_t i = 0; i < 4; ++i) {
    if (!(encoder[i].stats == other.encoder[i].stats) || encoder[i].pool != other.encoder[i].pool) {
      return false;
    }
  }
  for (std::size_t i = 0; i < 2; ++i) {
    if (!(relation[i].stats == other.relation[i].stats)) return false;
  }
  return true;
}

FreezePolicy ParseFreezePolicy(const std::string& name) {
  if (name == "none") return FreezePolicy::kNone;
  if (name == "encoder") return FreezePolicy::kEncoder;
  if (name == "all") return FreezePolicy::kAll;
  Fail(ErrorKind::kInvalidArgument, "unknown freeze policy '" + name + "' (none|encoder|all)");
}

Var EncodeGraph(Tape& tape, RelationNetWeights& weights, Var images, Mode mode) {
  const Tensor& x = tape.value(images);
  const RelationNetConfig& c = weights.config;
  if (x.rank() != 4 || x.dim(1) != c.input_channels || x.dim(2) != c.input_size ||
      x.dim(3) != c.input_size) {
    Fail(ErrorKind::kShapeMismatch,
         "encode: expected [N," + std::to_string(c.input_channels) + "," +
             std::to_string(c.input_size) + "," + std::to_string(c.input_size) + "], got " +
             ShapeString(x.shape()));
  }
  Var y = images;
  for (ConvBlock& b : weights.encoder) y = BlockGraph(tape, b, y, mode);
  return y;
}

Var RelationGraph(Tape& tape, RelationNetWeights& weights, Var sample_embeddings,
                  Var query_embeddings,
                  const std::vector<std::pair<std::size_t, std::size_t>>& pairs, Mode mode) {
  ConvBlock& first = weights.relation[0];
  const std::size_t width = weights.config.width;
  Var kernel = tape.parameter(first.kernel);
  Var sample_part = ag::conv2d(tape, sample_embeddings, ag::slice_axis1(tape, kernel, 0, width),
                               tape.parameter(first.bias), 1);
  Var query_part = ag::conv2d(tape, query_embeddings,
                              ag::slice_axis1(tape, kernel, width, 2 * width), Var{}, 1);
  Var y = ag::pair_sum(tape, sample_part, query_part, pairs);
  y = Normalize(tape, first, y, mode);
  return HeadGraph(tape, weights, y, mode);
}

Var RelationGraphConcat(Tape& tape, RelationNetWeights& weights, Var pairs, Mode mode) {
  Var y = BlockGraph(tape, weights.relation[0], pairs, mode);
  return HeadGraph(tape, weights, y, mode);
}

Tensor StackImages(const std::vector<const Tensor*>& images) {
  if (images.empty()) Fail(ErrorKind::kInvalidArgument, "StackImages: no images");
  const Shape item = images.front()->shape();
  Shape shape{images.size()};
  shape.insert(shape.end(), item.begin(), item.end());
  std::vector<double> data;
  data.reserve(ShapeSize(shape));
  for (const Tensor* t : images) {
    RequireSameShape(*images.front(), *t, "StackImages");
    const auto v = t->data();
    data.insert(data.end(), v.begin(), v.end());
  }
  return Tensor(std::move(shape), std::move(data));
}

Tensor encode(const RelationNetWeights& weights, const Tensor& image) {
  if (image.rank() != 3) {
    Fail(ErrorKind::kShapeMismatch, "encode: expected [C,H,W], got " + ShapeString(image.shape()));
  }
  Tensor batch = encode_batch(weights, StackImages({&image}));
  Shape shape(batch.shape().begin() + 1, batch.shape().end());
  return batch.reshaped(shape);
}

Tensor encode_batch(const RelationNetWeights& weights, const Tensor& images) {
  if (images.rank() != 4) {
    Fail(ErrorKind::kShapeMismatch,
         "encode: expected [N,C,H,W], got " + ShapeString(images.shape()));
  }
  const std::size_t n = images.dim(0);
  std::vector<double> out;
  Shape shape;
  for (std::size_t begin = 0; begin < n; begin += kEncodeChunk) {
    const std::size_t end = std::min(n, begin + kEncodeChunk);
    Tape tape;
    Var x = tape.constant(Slice0(images, begin, end));
    const Tensor& e = tape.value(EncodeGraph(tape, Mutable(weights), x, Mode::kEval));
    if (shape.empty()) shape = e.shape();
    const auto v = e.data();
    out.insert(out.end(), v.begin(), v.end());
  }
  shape[0] = n;
  return Tensor(std::move(shape), std::move(out));
}

Tensor concat_pair(const Tensor& sample_embedding, const Tensor& query_embedding) {
  RequireSameShape(sample_embedding, query_embedding, "concat_pair");
  if (sample_embedding.rank() != 3) {
    Fail(ErrorKind::kShapeMismatch,
         "concat_pair: expected [C,H,W], got " + ShapeString(sample_embedding.shape()));
  }
  Shape shape = sample_embedding.shape();
  shape[0] *= 2;
  std::vector<double> data(sample_embedding.values().begin(), sample_embedding.values().end());
  data.insert(data.end(), query_embedding.values().begin(), query_embedding.values().end());
  return Tensor(std::move(shape), std::move(data));
}

double relation_score(const RelationNetWeights& weights, const Tensor& pair) {
  const std::size_t e = weights.config.embedding_size();
  if (pair.shape() != Shape{2 * weights.config.width, e, e}) {
    Fail(ErrorKind::kShapeMismatch, "relation_score: expected [" +
                                        std::to_string(2 * weights.config.width) + "," +
                                        std::to_string(e) + "," + std::to_string(e) + "], got " +
                                        ShapeString(pair.shape()));
  }
  Tape tape;
  Var x = tape.constant(StackImages({&pair}));
  return tape.value(RelationGraphConcat(tape, Mutable(weights), x, Mode::kEval))[0];
}

std::vector<double> relation_scores(const RelationNetWeights& weights, const Tensor& samples,
                                    const Tensor& query) {
  if (samples.rank() != 4 || query.rank() != 3 ||
      !std::equal(query.shape().begin(), query.shape().end(), samples.shape().begin() + 1)) {
    Fail(ErrorKind::kShapeMismatch, "relation_scores: samples " + ShapeString(samples.shape()) +
                                        " and query " + ShapeString(query.shape()) +
                                        " are incompatible");
  }
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < samples.dim(0); ++i) pairs.emplace_back(i, 0);
  Tape tape;
  Var s = tape.constant_ref(samples);
  Var q = tape.constant(StackImages({&query}));
  const Tensor& scores = tape.value(RelationGraph(tape, Mutable(weights), s, q, pairs, Mode::kEval));
  return {scores.values().begin(), scores.values().end()};
}

Episode build_episode(const std::vector<SubjectImages>& subjects, std::size_t way,
                      std::size_t shot, std::size_t queries, std::uint64_t seed) {
  if (way == 0 || shot == 0 || queries == 0) {
    Fail(ErrorKind::kInvalidArgument, "build_episode: way, shot and queries must be positive");
  }
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < subjects.size(); ++i) {
    if (subjects[i].genuine.size() >= shot + queries) eligible.push_back(i);
  }
  if (eligible.size() < way) {
    Fail(ErrorKind::kInsufficientData,
         "build_episode: " + std::to_string(eligible.size()) + " of " +
             std::to_string(subjects.size()) + " classes have at least " +
             std::to_string(shot + queries) + " images, need " + std::to_string(way));
  }
  Rng rng(seed);
  Episode ep;
  ep.way = way;
  ep.shot = shot;
  ep.queries = queries;
  ep.seed = seed;
  for (std::size_t pick : rng.sample_without_replacement(eligible.size(), way)) {
    ep.classes.push_back(eligible[pick]);
  }
  for (std::size_t c = 0; c < way; ++c) {
    const std::size_t subject = ep.classes[c];
    const auto order = rng.sample_without_replacement(subjects[subject].genuine.size(), shot + queries);
    for (std::size_t i = 0; i < shot + queries; ++i) {
      if (i < shot) {
        ep.samples.push_back({subject, order[i]});
        ep.sample_labels.push_back(c);
      } else {
        ep.query_set.push_back({subject, order[i]});
        ep.query_labels.push_back(c);
      }
    }
  }
  for (std::size_t q = 0; q < ep.query_set.size(); ++q) {
    for (std::size_t s = 0; s < ep.samples.size(); ++s) {
      ep.pairs.emplace_back(s, q);
      ep.targets.push_back(ep.sample_labels[s] == ep.query_labels[q] ? 1.0 : 0.0);
    }
  }
  return ep;
}

namespace {

Var EpisodeLossGraph(Tape& tape, RelationNetWeights& weights,
                     const std::vector<SubjectImages>& subjects, const Episode& episode,
                     Mode mode) {
  std::vector<const Tensor*> samples, queries;
  for (const ImageRef& r : episode.samples) samples.push_back(&Image(subjects, r));
  for (const ImageRef& r : episode.query_set) queries.push_back(&Image(subjects, r));
  // Samples and queries are normalized as separate batches.
  Var s = EncodeGraph(tape, weights, tape.constant(StackImages(samples)), mode);
  Var q = EncodeGraph(tape, weights, tape.constant(StackImages(queries)), mode);
  Var scores = RelationGraph(tape, weights, s, q, episode.pairs, mode);
  Var target = tape.constant(Tensor(Shape{episode.pairs.size(), 1}, episode.targets));
  return ag::mse_loss(tape, scores, target);
}

double Step(Tape& tape, Var loss, RelationNetWeights& weights, Adam& optimizer) {
  const double value = tape.value(loss)[0];
  const auto params = weights.parameters();
  for (Parameter* p : params) p->zero_grad();
  tape.backward(loss);
  optimizer.step(params);
  return value;
}

}  // namespace

double train_episode(RelationNetWeights& weights, Adam& optimizer,
                     const std::vector<SubjectImages>& subjects, const Episode& episode) {
  Tape tape;
  Var loss = EpisodeLossGraph(tape, weights, subjects, episode, Mode::kTrain);
  return Step(tape, loss, weights, optimizer);
}

double episode_loss(RelationNetWeights& weights, const std::vector<SubjectImages>& subjects,
                    const Episode& episode, Mode mode) {
  Tape tape;
  return tape.value(EpisodeLossGraph(tape, weights, subjects, episode, mode))[0];
}

std::vector<Trial> build_trials(const std::vector<SubjectImages>& subjects, std::size_t count,
                                std::size_t shot, std::uint64_t seed) {
  if (shot == 0) Fail(ErrorKind::kInvalidArgument, "build_trials: shot must be positive");
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < subjects.size(); ++i) {
    if (subjects[i].genuine.size() >= shot + 1) eligible.push_back(i);
  }
  if (eligible.empty()) {
    Fail(ErrorKind::kInsufficientData,
         "build_trials: no subject has " + std::to_string(shot + 1) + " genuine images");
  }
  std::vector<Trial> trials;
  for (std::size_t t = 0; t < count; ++t) {
    Rng rng(DeriveSeed(seed, t));
    Trial trial;
    trial.subject = eligible[rng.uniform_index(eligible.size())];
    const SubjectImages& s = subjects[trial.subject];
    const auto order = rng.sample_without_replacement(s.genuine.size(), shot + 1);
    trial.supports.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(shot));
    trial.genuine = rng.uniform01() < 0.5;
    if (trial.genuine) {
      trial.query = {trial.subject, order[shot]};
    } else if (!s.forged.empty()) {
      trial.query = {trial.subject, rng.uniform_index(s.forged.size())};
      trial.query_forged = true;
    } else {
      std::vector<std::size_t> others;
      for (std::size_t i = 0; i < subjects.size(); ++i) {
        if (i != trial.subject && !subjects[i].genuine.empty()) others.push_back(i);
      }
      if (others.empty()) {
        Fail(ErrorKind::kInsufficientData,
             "build_trials: impostor queries need forgeries or a second subject");
      }
      const std::size_t other = others[rng.uniform_index(others.size())];
      trial.query = {other, rng.uniform_index(subjects[other].genuine.size())};
    }
    trials.push_back(std::move(trial));
  }
  return trials;
}

double cross_validate(const RelationNetWeights& weights,
                      const std::vector<SubjectImages>& subjects, const std::vector<Trial>& trials,
                      double threshold) {
  if (trials.empty()) Fail(ErrorKind::kInsufficientData, "cross_validate: no validation trials");
  // Each distinct image is embedded once.
  std::map<std::tuple<std::size_t, std::size_t, bool>, std::size_t> slot;
  std::vector<const Tensor*> images;
  auto add = [&](const ImageRef& r, bool forged) {
    auto [it, inserted] = slot.try_emplace({r.subject, r.index, forged}, images.size());
    if (inserted) images.push_back(&Image(subjects, r, forged));
    return it->second;
  };
  std::vector<std::vector<std::size_t>> support_slots(trials.size());
  std::vector<std::size_t> query_slots(trials.size());
  for (std::size_t t = 0; t < trials.size(); ++t) {
    for (std::size_t i : trials[t].supports) support_slots[t].push_back(add({trials[t].subject, i}, false));
    query_slots[t] = add(trials[t].query, trials[t].query_forged);
  }
  const Tensor embeddings = encode_batch(weights, StackImages(images));
  const std::size_t item = embeddings.size() / embeddings.dim(0);
  const Shape item_shape(embeddings.shape().begin() + 1, embeddings.shape().end());
  auto embedding = [&](std::size_t s) {
    const auto v = embeddings.data();
    return Tensor(item_shape, std::vector<double>(v.begin() + static_cast<std::ptrdiff_t>(s * item),
                                                  v.begin() + static_cast<std::ptrdiff_t>((s + 1) * item)));
  };

  std::size_t correct = 0;
  for (std::size_t t = 0; t < trials.size(); ++t) {
    std::vector<Tensor> supports;
    std::vector<const Tensor*> refs;
    for (std::size_t s : support_slots[t]) supports.push_back(embedding(s));
    for (const Tensor& s : supports) refs.push_back(&s);
    const auto scores = relation_scores(weights, StackImages(refs), embedding(query_slots[t]));
    const double r = *std::max_element(scores.begin(), scores.end());
    correct += (r > threshold) == trials[t].genuine;
  }
  return static_cast<double>(correct) / static_cast<double>(trials.size());
}

bool CheckpointSelector::offer(std::size_t episode, double accuracy,
                               const RelationNetWeights& weights) {
  history_.push_back({episode, accuracy});
  if (best_.has_value() && !(accuracy > best_accuracy_)) return false;
  best_ = weights;
  best_accuracy_ = accuracy;
  best_episode_ = episode;
  return true;
}

namespace {

// Shared driver: `run(e)` performs episode e and returns its loss.
template <typename RunEpisode>
TrainReport RunLoop(RelationNetWeights& weights, std::size_t episodes, const AdamOptions& adam,
                    std::size_t halve_every, std::size_t validate_every,
                    const std::vector<SubjectImages>& validation,
                    const std::vector<Trial>& trials, Adam& optimizer, RunEpisode&& run,
                    const ProgressFn& progress) {
  TrainReport report;
  CheckpointSelector selector;
  for (std::size_t e = 0; e < episodes; ++e) {
    optimizer.set_learning_rate(LearningRate(adam.learning_rate, e, halve_every));
    ProgressRecord record;
    record.episode = e + 1;
    record.loss = run(e);
    report.losses.push_back(record.loss);
    if (!trials.empty() && validate_every > 0 && (e + 1) % validate_every == 0) {
      const double acc = cross_validate(weights, validation, trials);
      selector.offer(e + 1, acc, weights);
      report.validations.push_back({e + 1, acc});
      record.validation_accuracy = acc;
    }
    if (progress) progress(record);
  }
  if (selector.has_best()) {
    weights = selector.best();
    report.best = CheckpointLog{selector.best_episode(), selector.best_accuracy()};
  }
  return report;
}

}  // namespace

TrainReport train_relation_net(RelationNetWeights& weights,
                               const std::vector<SubjectImages>& train,
                               const std::vector<SubjectImages>& validation,
                               const TrainOptions& options, const ProgressFn& progress) {
  std::vector<Trial> trials;
  if (!validation.empty() && options.validation_trials > 0) {
    trials = build_trials(validation, options.validation_trials, options.validation_shot,
                          DeriveSeed(options.seed, 0x76616c));
  }
  Adam optimizer(options.adam);
  auto run = [&](std::size_t e) {
    const Episode ep =
        build_episode(train, options.way, options.shot, options.queries, DeriveSeed(options.seed, e));
    return train_episode(weights, optimizer, train, ep);
  };
  return RunLoop(weights, options.episodes, options.adam, options.halve_lr_every,
                 options.validate_every, validation, trials, optimizer, run, progress);
}

TrainReport finetune_forgery(RelationNetWeights& weights,
                             const std::vector<SubjectImages>& subjects,
                             const std::vector<SubjectImages>& validation,
                             const FinetuneOptions& options, const ProgressFn& progress) {
  if (options.shot == 0 || options.queries < 2) {
    Fail(ErrorKind::kInvalidArgument, "finetune: shot must be positive and queries at least 2");
  }
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < subjects.size(); ++i) {
    if (!subjects[i].forged.empty() && subjects[i].genuine.size() > options.shot) {
      eligible.push_back(i);
    }
  }
  if (eligible.empty()) {
    Fail(ErrorKind::kInsufficientData,
         "finetune: empty forged pool (need a subject with forgeries and more than " +
             std::to_string(options.shot) + " genuine images)");
  }
  std::vector<Trial> trials;
  if (!validation.empty() && options.validation_trials > 0) {
    trials = build_trials(validation, options.validation_trials, options.shot,
                          DeriveSeed(options.seed, 0x76616c));
  }

  std::vector<bool> saved_frozen;
  for (Parameter* p : weights.parameters()) saved_frozen.push_back(p->frozen);
  weights.apply_freeze(options.freeze);

  Adam optimizer(options.adam);
  auto run = [&](std::size_t e) {
    Rng rng(DeriveSeed(options.seed, e));
    const std::size_t way = std::min(std::max<std::size_t>(options.way, 1), eligible.size());
    std::vector<const Tensor*> supports, queries;
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    std::vector<double> targets;
    for (std::size_t c : rng.sample_without_replacement(eligible.size(), way)) {
      const SubjectImages& s = subjects[eligible[c]];
      const auto order = rng.sample_without_replacement(s.genuine.size(), s.genuine.size());
      const std::size_t first_support = supports.size();
      for (std::size_t i = 0; i < options.shot; ++i) supports.push_back(&s.genuine[order[i]]);
      const std::size_t forged = std::min(options.queries / 2, s.forged.size());
      const std::size_t genuine = std::min(options.queries - forged, order.size() - options.shot);
      auto add_query = [&](const Tensor* image, double label) {
        for (std::size_t i = 0; i < options.shot; ++i) {
          pairs.emplace_back(first_support + i, queries.size());
          targets.push_back(label);
        }
        queries.push_back(image);
      };
      for (std::size_t i = 0; i < genuine; ++i) add_query(&s.genuine[order[options.shot + i]], 1.0);
      for (std::size_t i : rng.sample_without_replacement(s.forged.size(), forged)) {
        add_query(&s.forged[i], 0.0);
      }
    }

    Tape tape;
    Var se = EncodeGraph(tape, weights, tape.constant(StackImages(supports)), Mode::kTrain);
    Var qe = EncodeGraph(tape, weights, tape.constant(StackImages(queries)), Mode::kTrain);
    Var scores = RelationGraph(tape, weights, se, qe, pairs, Mode::kTrain);
    Var target = tape.constant(Tensor(Shape{pairs.size(), 1}, std::move(targets)));
    return Step(tape, ag::mse_loss(tape, scores, target), weights, optimizer);
  };
  TrainReport report = RunLoop(weights, options.episodes, options.adam, options.halve_lr_every,
                               options.validate_every, validation, trials, optimizer, run, progress);

  const auto params = weights.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) params[i]->frozen = saved_frozen[i];
  return report;
}

}  // namespace fsbv
