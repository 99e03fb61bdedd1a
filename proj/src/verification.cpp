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

#include "fsbv/verification.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <map>
#include <memory>
#include <sstream>

#include "fsbv/error.hpp"
#include "fsbv/hash.hpp"
#include "fsbv/rng.hpp"

namespace fsbv {
namespace {

std::string FormatDouble(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

Tensor NetworkInput(const ImageSample& image, const RelationNetWeights& weights) {
  return normalize_input(standardize(image, weights.config.input_channels));
}

}  // namespace

std::string EnrollConfig::canonical() const {
  std::ostringstream out;
  out << "enroll.min_images=" << min_images << "\n"
      << "enroll.clusters=" << clusters << "\n"
      << "enroll.variance_target=" << FormatDouble(variance_target) << "\n"
      << "enroll.seed=" << seed << "\n"
      << "enroll.stored_supports=" << stored_supports << "\n"
      << "ocsvm.nu=" << FormatDouble(ocsvm.nu) << "\n"
      << "ocsvm.gamma=" << (ocsvm.gamma ? FormatDouble(*ocsvm.gamma) : "auto") << "\n"
      << "ocsvm.tolerance=" << FormatDouble(ocsvm.tolerance) << "\n"
      << "orb.fast_threshold=" << FormatDouble(orb.fast_threshold) << "\n"
      << "orb.max_keypoints=" << orb.max_keypoints << "\n";
  return out.str();
}

std::uint64_t EnrollConfig::fingerprint() const { return Fnv1a64(canonical()); }

bool SubjectModel::operator==(const SubjectModel& o) const {
  if (subject_id != o.subject_id || enrollment_count != o.enrollment_count ||
      blank_images != o.blank_images || config_fingerprint != o.config_fingerprint) {
    return false;
  }
  if (codebook.centroids != o.codebook.centroids ||
      codebook.inertia_history != o.codebook.inertia_history) {
    return false;
  }
  if (pca.mean != o.pca.mean || pca.components != o.pca.components ||
      pca.eigenvalues != o.pca.eigenvalues || pca.retained_dims != o.pca.retained_dims) {
    return false;
  }
  if (ocsvm.support_vectors != o.ocsvm.support_vectors || ocsvm.alphas != o.ocsvm.alphas ||
      ocsvm.rho != o.ocsvm.rho || ocsvm.gamma != o.ocsvm.gamma || ocsvm.nu != o.ocsvm.nu ||
      ocsvm.iterations != o.ocsvm.iterations) {
    return false;
  }
  if (supports.size() != o.supports.size()) return false;
  for (std::size_t i = 0; i < supports.size(); ++i) {
    if (!(supports[i].pixels == o.supports[i].pixels)) return false;
  }
  return true;
}

std::vector<RealVector> DescriptorVectors(const ImageSample& image, const OrbConfig& orb) {
  std::vector<RealVector> out;
  for (const BinaryDescriptor& d : orb_extract(image, orb).descriptors) out.push_back(d.to_real());
  return out;
}

QueryFeature subject_feature(const SubjectModel& model, const ImageSample& image,
                             const OrbConfig& orb) {
  const auto descriptors = DescriptorVectors(image, orb);
  QueryFeature out;
  out.blank = descriptors.empty();
  const RealVector hist = out.blank ? UniformHistogram(model.codebook.k())
                                    : bovw_histogram(model.codebook, descriptors);
  out.feature = pca_project(model.pca, hist);
  out.feature.subject_id = image.subject_id;
  out.feature.label = image.label;
  return out;
}

double decision_distance(const SubjectModel& model, const ImageSample& image,
                         const OrbConfig& orb) {
  return ocsvm_decision(model.ocsvm, subject_feature(model, image, orb).feature.values);
}

SubjectModel enroll_subject(const std::string& subject_id,
                            const std::vector<ImageSample>& genuine, const EnrollConfig& config) {
  if (genuine.size() < config.min_images) {
    Fail(ErrorKind::kInsufficientData,
         "enroll: subject " + subject_id + " has " + std::to_string(genuine.size()) +
             " genuine images, minimum is " + std::to_string(config.min_images));
  }
  SubjectModel model;
  model.subject_id = subject_id;
  model.enrollment_count = genuine.size();
  model.config_fingerprint = config.fingerprint();

  std::vector<std::vector<RealVector>> per_image;
  std::vector<RealVector> pooled;
  for (const ImageSample& img : genuine) {
    auto d = DescriptorVectors(img, config.orb);
    if (d.empty()) {
      ++model.blank_images;
      continue;
    }
    pooled.insert(pooled.end(), d.begin(), d.end());
    per_image.push_back(std::move(d));
  }
  if (per_image.size() < 2) {
    Fail(ErrorKind::kInsufficientData,
         "enroll: subject " + subject_id + " has " + std::to_string(per_image.size()) +
             " images with descriptors, need at least 2");
  }
  // Small descriptor pools shrink the codebook rather than failing.
  const std::size_t k = std::min(config.clusters, pooled.size());
  model.codebook = kmeans_fit(pooled, k, config.seed);

  std::vector<RealVector> histograms;
  for (const auto& d : per_image) histograms.push_back(bovw_histogram(model.codebook, d));
  model.pca = pca_fit(histograms, config.variance_target);
  std::vector<RealVector> features;
  for (const RealVector& h : histograms) features.push_back(pca_project(model.pca, h).values);
  model.ocsvm = ocsvm_fit(features, config.ocsvm);

  for (std::size_t i = 0; i < genuine.size() && i < config.stored_supports; ++i) {
    model.supports.push_back(genuine[i]);
  }
  return model;
}

bool Decide(double relation, double confidence) { return relation > confidence; }

VerificationVerdict fuse(double relation, double distance, const ScalingConfig& scaling,
                         std::size_t support_size) {
  VerificationVerdict v;
  v.relation = relation;
  v.distance = distance;
  v.confidence = confidence_factor(distance, scaling).value;
  v.genuine = Decide(relation, v.confidence);
  v.support_size = support_size;
  return v;
}

VerificationVerdict verify(const SubjectModel& model, const RelationNetWeights& weights,
                           const std::vector<ImageSample>& supports, const ImageSample& query,
                           const ScalingConfig& scaling, const OrbConfig& orb) {
  if (supports.empty()) Fail(ErrorKind::kInvalidArgument, "verify: no support images");
  std::vector<Tensor> inputs;
  for (const ImageSample& s : supports) inputs.push_back(NetworkInput(s, weights));
  std::vector<const Tensor*> refs;
  for (const Tensor& t : inputs) refs.push_back(&t);
  const Tensor support_emb = encode_batch(weights, StackImages(refs));
  const auto scores = relation_scores(weights, support_emb, encode(weights, NetworkInput(query, weights)));
  const QueryFeature f = subject_feature(model, query, orb);
  VerificationVerdict v = fuse(*std::max_element(scores.begin(), scores.end()),
                               ocsvm_decision(model.ocsvm, f.feature.values), scaling,
                               supports.size());
  v.blank_query = f.blank;
  return v;
}

void MetricsReport::finalize_rates() {
  const std::size_t total = tp + tn + fp + fn;
  accuracy = total ? static_cast<double>(tp + tn) / static_cast<double>(total) : 0.0;
  far = (fp + tn) ? static_cast<double>(fp) / static_cast<double>(fp + tn) : 0.0;
  frr = (fn + tp) ? static_cast<double>(fn) / static_cast<double>(fn + tp) : 0.0;
}

std::string MetricsReport::to_kv() const {
  std::ostringstream out;
  out << "accuracy=" << FormatDouble(accuracy) << "\n"
      << "far=" << FormatDouble(far) << "\n"
      << "frr=" << FormatDouble(frr) << "\n"
      << "eer=" << FormatDouble(eer) << "\n"
      << "far_global=" << FormatDouble(far_global) << "\n"
      << "tp=" << tp << "\n"
      << "tn=" << tn << "\n"
      << "fp=" << fp << "\n"
      << "fn=" << fn << "\n"
      << "episodes=" << episodes << "\n"
      << "seed=" << seed << "\n";
  return out.str();
}

double compute_eer(const std::vector<double>& genuine_scores,
                   const std::vector<double>& impostor_scores) {
  if (genuine_scores.empty() || impostor_scores.empty()) {
    Fail(ErrorKind::kInsufficientData, "compute_eer: both score lists must be non-empty");
  }
  std::vector<double> g = genuine_scores, im = impostor_scores;
  for (double v : g) {
    if (!std::isfinite(v)) Fail(ErrorKind::kNonFinite, "compute_eer: non-finite score");
  }
  for (double v : im) {
    if (!std::isfinite(v)) Fail(ErrorKind::kNonFinite, "compute_eer: non-finite score");
  }
  std::sort(g.begin(), g.end());
  std::sort(im.begin(), im.end());
  std::vector<double> nodes = g;
  nodes.insert(nodes.end(), im.begin(), im.end());
  std::sort(nodes.begin(), nodes.end());
  nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());

  const double ng = static_cast<double>(g.size()), ni = static_cast<double>(im.size());
  auto far_at = [&](double t) {
    return static_cast<double>(im.end() - std::lower_bound(im.begin(), im.end(), t)) / ni;
  };
  auto frr_at = [&](double t) {
    return static_cast<double>(std::lower_bound(g.begin(), g.end(), t) - g.begin()) / ng;
  };
  double prev_far = 1.0, prev_frr = 0.0;  // below every score
  for (std::size_t j = 0; j <= nodes.size(); ++j) {
    // The final node lies above every score.
    const double far = j < nodes.size() ? far_at(nodes[j]) : 0.0;
    const double frr = j < nodes.size() ? frr_at(nodes[j]) : 1.0;
    const double d = far - frr;
    if (d <= 0.0) {
      if (d == 0.0) return far;
      const double prev_d = prev_far - prev_frr;
      const double lambda = prev_d / (prev_d - d);
      return prev_far + lambda * (far - prev_far);
    }
    prev_far = far;
    prev_frr = frr;
  }
  return prev_far;  // unreachable: the final node has far - frr = -1
}

std::vector<EvalQuery> sample_eval_queries(const std::vector<EvalSubject>& subjects,
                                           std::size_t episodes, std::size_t support_k,
                                           std::uint64_t seed) {
  if (support_k == 0) Fail(ErrorKind::kInvalidArgument, "evaluate: support_k must be positive");
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < subjects.size(); ++i) {
    if (subjects[i].enrollment.size() >= support_k && !subjects[i].genuine_queries.empty()) {
      eligible.push_back(i);
    }
  }
  if (eligible.empty()) {
    Fail(ErrorKind::kInsufficientData, "evaluate: no subject has " + std::to_string(support_k) +
                                           " enrollment images and a genuine query");
  }
  std::vector<EvalQuery> out;
  for (std::size_t e = 0; e < episodes; ++e) {
    Rng rng(DeriveSeed(seed, e));
    EvalQuery q;
    q.subject = eligible[rng.uniform_index(eligible.size())];
    const EvalSubject& s = subjects[q.subject];
    q.supports = rng.sample_without_replacement(s.enrollment.size(), support_k);
    q.genuine = rng.uniform01() < 0.5;
    if (q.genuine) {
      q.query_subject = q.subject;
      q.query_index = rng.uniform_index(s.genuine_queries.size());
    } else if (!s.forged.empty()) {
      q.query_subject = q.subject;
      q.query_index = rng.uniform_index(s.forged.size());
      q.forged = true;
    } else {
      std::vector<std::size_t> others;
      for (std::size_t i = 0; i < subjects.size(); ++i) {
        if (i != q.subject && !subjects[i].genuine_queries.empty()) others.push_back(i);
      }
      if (others.empty()) {
        Fail(ErrorKind::kInsufficientData,
             "evaluate: impostor queries need forgeries or at least 2 classes");
      }
      q.query_subject = others[rng.uniform_index(others.size())];
      q.query_index = rng.uniform_index(subjects[q.query_subject].genuine_queries.size());
    }
    out.push_back(std::move(q));
  }
  return out;
}

MetricsReport evaluate_episodes(const std::vector<EvalSubject>& subjects, const Verifier& verifier,
                                std::size_t episodes, std::size_t support_k, std::uint64_t seed) {
  const auto queries = sample_eval_queries(subjects, episodes, support_k, seed);
  MetricsReport report;
  report.episodes = episodes;
  report.seed = seed;
  std::vector<double> genuine_scores, impostor_scores;
  std::size_t global_fp = 0;
  for (const EvalQuery& q : queries) {
    const VerifierOutcome o = verifier(q);
    if (q.genuine) {
      (o.accept ? report.tp : report.fn) += 1;
      genuine_scores.push_back(o.score);
    } else {
      (o.accept ? report.fp : report.tn) += 1;
      impostor_scores.push_back(o.score);
      global_fp += o.score > 0.5;
    }
  }
  report.finalize_rates();
  if (!impostor_scores.empty()) {
    report.far_global =
        static_cast<double>(global_fp) / static_cast<double>(impostor_scores.size());
  }
  if (!genuine_scores.empty() && !impostor_scores.empty()) {
    report.eer = compute_eer(genuine_scores, impostor_scores);
  }
  return report;
}

Verifier MakeHybridVerifier(const std::vector<EvalSubject>& subjects,
                            const std::vector<SubjectModel>& models,
                            const RelationNetWeights& weights, const ScalingConfig& scaling,
                            const OrbConfig& orb) {
  struct Cache {
    std::vector<const SubjectModel*> model;
    std::vector<Tensor> enrollment, genuine, forged;  // embeddings per subject
    std::map<std::tuple<std::size_t, std::size_t, std::size_t, bool>, double> distance;
  };
  auto cache = std::make_shared<Cache>();
  std::map<std::string, const SubjectModel*> by_id;
  for (const SubjectModel& m : models) by_id[m.subject_id] = &m;
  auto embed = [&](const std::vector<ImageSample>& images) {
    if (images.empty()) return Tensor();
    std::vector<Tensor> inputs;
    for (const ImageSample& img : images) inputs.push_back(NetworkInput(img, weights));
    std::vector<const Tensor*> refs;
    for (const Tensor& t : inputs) refs.push_back(&t);
    return encode_batch(weights, StackImages(refs));
  };
  for (const EvalSubject& s : subjects) {
    auto it = by_id.find(s.id);
    cache->model.push_back(it == by_id.end() ? nullptr : it->second);
    cache->enrollment.push_back(embed(s.enrollment));
    cache->genuine.push_back(embed(s.genuine_queries));
    cache->forged.push_back(embed(s.forged));
  }
  auto item = [](const Tensor& batch, std::size_t i) {
    const Shape shape(batch.shape().begin() + 1, batch.shape().end());
    const std::size_t len = ShapeSize(shape);
    const auto v = batch.data();
    return Tensor(shape, std::vector<double>(v.begin() + static_cast<std::ptrdiff_t>(i * len),
                                             v.begin() + static_cast<std::ptrdiff_t>((i + 1) * len)));
  };

  return [&subjects, &weights, scaling, orb, cache, item](const EvalQuery& q) {
    const SubjectModel* model = cache->model.at(q.subject);
    if (model == nullptr) {
      Fail(ErrorKind::kNotFound, "evaluate: subject " + subjects[q.subject].id + " is not enrolled");
    }
    std::vector<Tensor> sup;
    for (std::size_t i : q.supports) sup.push_back(item(cache->enrollment[q.subject], i));
    std::vector<const Tensor*> refs;
    for (const Tensor& t : sup) refs.push_back(&t);
    const Tensor& pool = q.forged ? cache->forged[q.query_subject] : cache->genuine[q.query_subject];
    const auto scores = relation_scores(weights, StackImages(refs), item(pool, q.query_index));
    const double r = *std::max_element(scores.begin(), scores.end());

    const auto key = std::make_tuple(q.subject, q.query_subject, q.query_index, q.forged);
    auto it = cache->distance.find(key);
    if (it == cache->distance.end()) {
      const EvalSubject& qs = subjects[q.query_subject];
      const ImageSample& img = q.forged ? qs.forged[q.query_index] : qs.genuine_queries[q.query_index];
      it = cache->distance.emplace(key, decision_distance(*model, img, orb)).first;
    }
    const VerificationVerdict v = fuse(r, it->second, scaling, q.supports.size());
    return VerifierOutcome{v.genuine, r};
  };
}

}  // namespace fsbv
