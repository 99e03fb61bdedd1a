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

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "fsbv/bovw.hpp"
#include "fsbv/confidence.hpp"
#include "fsbv/image.hpp"
#include "fsbv/ocsvm.hpp"
#include "fsbv/orb.hpp"
#include "fsbv/pca.hpp"
#include "fsbv/relation_net.hpp"

namespace fsbv {

struct EnrollConfig {
  std::size_t min_images = 5;
  std::size_t clusters = kDefaultClusters;
  double variance_target = kDefaultVarianceTarget;
  OcsvmOptions ocsvm;
  OrbConfig orb;
  std::uint64_t seed = 0;
  /// Genuine images kept in the model as verification supports.
  std::size_t stored_supports = 5;

  /// Canonical key=value text; its FNV-1a hash is the config fingerprint.
  std::string canonical() const;
  std::uint64_t fingerprint() const;
};

/// Per-subject one-class model: codebook -> histogram -> PCA -> OC-SVM.
struct SubjectModel {
  std::string subject_id;
  Codebook codebook;
  PcaBasis pca;
  OcsvmModel ocsvm;
  std::size_t enrollment_count = 0;
  std::size_t blank_images = 0;  // enrollment images without descriptors
  std::uint64_t config_fingerprint = 0;
  std::vector<ImageSample> supports;  // standardized genuine images

  bool operator==(const SubjectModel& other) const;
};

/// Descriptors of a standardized image as 0/1 vectors.
std::vector<RealVector> DescriptorVectors(const ImageSample& image, const OrbConfig& orb);

struct QueryFeature {
  FeatureVector feature;
  bool blank = false;  // no descriptors; the histogram was uniform
};

QueryFeature subject_feature(const SubjectModel& model, const ImageSample& image,
                             const OrbConfig& orb = {});

/// Signed OC-SVM distance of a standardized image under the subject model.
double decision_distance(const SubjectModel& model, const ImageSample& image,
                         const OrbConfig& orb = {});

/// Images must already be standardized to 128x128.
SubjectModel enroll_subject(const std::string& subject_id,
                            const std::vector<ImageSample>& genuine, const EnrollConfig& config);

struct VerificationVerdict {
  double relation = 0.0;    // max relation score over the supports
  double confidence = 0.5;  // O, the per-query threshold
  double distance = 0.0;    // OC-SVM decision value
  bool genuine = false;     // relation > confidence
  std::size_t support_size = 0;
  bool blank_query = false;
};

/// Accept iff relation > confidence; a tie rejects.
bool Decide(double relation, double confidence);

/// Combines a precomputed relation score and OC-SVM distance into a verdict.
VerificationVerdict fuse(double relation, double distance, const ScalingConfig& scaling,
                         std::size_t support_size);

/// Full verification of a standardized query against standardized supports.
VerificationVerdict verify(const SubjectModel& model, const RelationNetWeights& weights,
                           const std::vector<ImageSample>& supports, const ImageSample& query,
                           const ScalingConfig& scaling = {}, const OrbConfig& orb = {});

// --- metrics ---

struct MetricsReport {
  std::size_t tp = 0, tn = 0, fp = 0, fn = 0;
  double accuracy = 0.0, far = 0.0, frr = 0.0, eer = 0.0;
  double far_global = 0.0;  // FAR of relation > 0.5 on the same queries
  std::size_t episodes = 0;
  std::uint64_t seed = 0;

  void finalize_rates();
  /// Flat key=value lines in a fixed order.
  std::string to_kv() const;
};

/// Equal error rate with FAR(t) = #impostor >= t / n_i and FRR(t) =
/// #genuine < t / n_g, linearly interpolated where FAR - FRR changes sign.
double compute_eer(const std::vector<double>& genuine_scores,
                   const std::vector<double>& impostor_scores);

// --- episodic evaluation ---

struct EvalSubject {
  std::string id;
  std::vector<ImageSample> enrollment;       // support pool
  std::vector<ImageSample> genuine_queries;  // disjoint from enrollment
  std::vector<ImageSample> forged;
};

struct EvalQuery {
  std::size_t subject = 0;
  std::vector<std::size_t> supports;  // indices into enrollment
  std::size_t query_subject = 0;
  std::size_t query_index = 0;
  bool forged = false;
  bool genuine = false;
};

struct VerifierOutcome {
  bool accept = false;
  double score = 0.0;  // relation score, used for EER and the global threshold
};

using Verifier = std::function<VerifierOutcome(const EvalQuery&)>;

/// Per episode: a target subject, `support_k` supports from its enrollment
/// pool and a query that is genuine with probability 1/2. Impostor queries
/// are forgeries when the subject has any, otherwise another subject's image.
std::vector<EvalQuery> sample_eval_queries(const std::vector<EvalSubject>& subjects,
                                           std::size_t episodes, std::size_t support_k,
                                           std::uint64_t seed);

MetricsReport evaluate_episodes(const std::vector<EvalSubject>& subjects, const Verifier& verifier,
                                std::size_t episodes, std::size_t support_k, std::uint64_t seed);

/// Verifier backed by subject models and relation-network weights. Every
/// image is embedded and projected once.
Verifier MakeHybridVerifier(const std::vector<EvalSubject>& subjects,
                            const std::vector<SubjectModel>& models,
                            const RelationNetWeights& weights, const ScalingConfig& scaling = {},
                            const OrbConfig& orb = {});

}  // namespace fsbv
