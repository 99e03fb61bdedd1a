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

#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "fsbv/error.hpp"
#include "fsbv/rng.hpp"
#include "fsbv/synth.hpp"
#include "fsbv/verification.hpp"
#include "oracles/eer_oracle.hpp"

using namespace fsbv;

namespace {

const std::vector<SynthClass>& Corpus() {
  static const std::vector<SynthClass> corpus = [] {
    SynthSpec spec;
    spec.classes = 3;
    spec.genuine = 12;
    spec.forged = 4;
    spec.seed = 5;
    return synth_render(spec);
  }();
  return corpus;
}

RelationNetWeights SmallNet() {
  RelationNetConfig c;
  c.width = 4;
  c.hidden = 4;
  return RelationNetWeights::Initialize(c, 3);
}

std::vector<EvalSubject> DummySubjects(std::size_t n, bool with_forgeries) {
  std::vector<EvalSubject> out(n);
  const ImageSample img = MakeImage(Tensor({1, 4, 4}, 0.5));
  for (std::size_t i = 0; i < n; ++i) {
    out[i].id = "s" + std::to_string(i);
    out[i].enrollment.assign(6, img);
    out[i].genuine_queries.assign(4, img);
    if (with_forgeries) out[i].forged.assign(3, img);
  }
  return out;
}

}  // namespace

TEST_CASE("compute_eer examples") {
  CHECK(compute_eer({0.9, 0.8, 0.7}, {0.1, 0.2, 0.3}) == 0.0);
  CHECK(compute_eer({0.9, 0.4}, {0.6, 0.1}) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(compute_eer({0.1, 0.2}, {0.8, 0.9}) == 1.0);
  const std::vector<double> same = {0.15, 0.3, 0.45, 0.6, 0.75, 0.9};
  CHECK(compute_eer(same, same) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK_THROWS_AS(compute_eer({}, {0.1}), Error);
  CHECK_THROWS_AS(compute_eer({0.5}, {}), Error);
}

TEST_CASE("compute_eer matches the dense grid sweep") {
  // Scores sit on a 1e-3 lattice so the 1e-4 grid resolves every distinct node.
  Rng rng(17);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t ng = 5 + rng.uniform_index(60), ni = 5 + rng.uniform_index(60);
    const double shift = 0.3 * rng.uniform01();
    auto draw = [&](double bias) {
      const double u = std::clamp(rng.uniform01() * 0.7 + bias, 0.001, 0.999);
      return std::round(u * 1000.0) / 1000.0;
    };
    std::vector<double> g(ng), im(ni);
    for (double& s : g) s = draw(shift);
    for (double& s : im) s = draw(0.0);
    const double eer = compute_eer(g, im);
    CHECK(eer >= 0.0);
    CHECK(eer <= 1.0);
    worst = std::max(worst, std::abs(eer - oracle::GridEer(g, im, 0.0, 1.0 + 1e-4, 1e-4)));
  }
  CHECK(worst <= 5e-4);
}

TEST_CASE("metrics from confusion counts") {
  MetricsReport r;
  r.tp = 90;
  r.tn = 85;
  r.fp = 5;
  r.fn = 20;
  r.finalize_rates();
  CHECK(r.accuracy == doctest::Approx(0.875));
  CHECK(r.far == doctest::Approx(5.0 / 90.0));
  CHECK(r.frr == doctest::Approx(20.0 / 110.0));
  const std::string kv = r.to_kv();
  for (const char* key : {"accuracy=", "far=", "frr=", "eer=", "tp=90", "tn=85", "fp=5", "fn=20",
                          "episodes=", "seed="}) {
    CHECK(kv.find(key) != std::string::npos);
  }
}

TEST_CASE("decision rule is strict") {
  CHECK_FALSE(Decide(0.3, 0.3));
  CHECK(Decide(0.300001, 0.3));
  CHECK_FALSE(Decide(0.2, 0.3));
  const ScalingConfig scaling;
  // A larger OC-SVM distance lowers the threshold, so acceptance is monotone.
  double prev = 1.0;
  for (double d = -2.0; d <= 2.0; d += 0.05) {
    const VerificationVerdict v = fuse(0.5, d, scaling, 1);
    CHECK(v.confidence <= prev);
    prev = v.confidence;
    CHECK(v.genuine == (0.5 > v.confidence));
  }
}

TEST_CASE("strict acceptance never raises FAR over the >= rule") {
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    std::size_t strict = 0, loose = 0;
    for (int i = 0; i < 200; ++i) {
      // Coarse values make exact ties common.
      const double r = std::round(rng.uniform01() * 10.0) / 10.0;
      const double o = std::round(rng.uniform01() * 10.0) / 10.0;
      strict += Decide(r, o);
      loose += r >= o;
    }
    CHECK(strict <= loose);
  }
}

TEST_CASE("evaluate_episodes with oracle and coin-flip verifiers") {
  const auto subjects = DummySubjects(4, true);
  const Verifier oracle = [](const EvalQuery& q) {
    return VerifierOutcome{q.genuine, q.genuine ? 0.9 : 0.1};
  };
  const MetricsReport perfect = evaluate_episodes(subjects, oracle, 200, 5, 3);
  CHECK(perfect.accuracy == 1.0);
  CHECK(perfect.far == 0.0);
  CHECK(perfect.frr == 0.0);
  CHECK(perfect.eer == 0.0);
  CHECK(perfect.tp + perfect.tn + perfect.fp + perfect.fn == 200);

  Rng coin(99);
  const Verifier flip = [&coin](const EvalQuery&) {
    const double u = coin.uniform01();
    return VerifierOutcome{u < 0.5, u};
  };
  const MetricsReport random = evaluate_episodes(subjects, flip, 10000, 1, 8);
  // 4 sigma of a fair binomial over 10000 trials is 0.02.
  CHECK(std::abs(random.accuracy - 0.5) <= 0.02);
}

TEST_CASE("evaluate_episodes is reproducible") {
  const auto subjects = DummySubjects(3, false);
  const Verifier v = [](const EvalQuery& q) {
    const double s = 0.1 * static_cast<double>(q.query_index + q.supports[0]) + (q.genuine ? 0.3 : 0.0);
    return VerifierOutcome{s > 0.5, s};
  };
  const MetricsReport a = evaluate_episodes(subjects, v, 300, 5, 42);
  const MetricsReport b = evaluate_episodes(subjects, v, 300, 5, 42);
  CHECK(a.to_kv() == b.to_kv());
  const MetricsReport c = evaluate_episodes(subjects, v, 300, 5, 43);
  CHECK(a.to_kv() != c.to_kv());
}

TEST_CASE("evaluation queries follow the protocol") {
  SUBCASE("forgeries are the impostors when present") {
    const auto subjects = DummySubjects(3, true);
    const auto queries = sample_eval_queries(subjects, 2000, 5, 11);
    std::size_t genuine = 0;
    for (const EvalQuery& q : queries) {
      CHECK(q.supports.size() == 5);
      std::vector<std::size_t> s = q.supports;
      std::sort(s.begin(), s.end());
      CHECK(std::adjacent_find(s.begin(), s.end()) == s.end());
      CHECK(q.query_subject == q.subject);
      CHECK(q.forged == !q.genuine);
      genuine += q.genuine;
    }
    CHECK(std::abs(static_cast<double>(genuine) / 2000.0 - 0.5) < 0.05);
  }
  SUBCASE("other subjects are the impostors without forgeries") {
    const auto subjects = DummySubjects(3, false);
    for (const EvalQuery& q : sample_eval_queries(subjects, 500, 1, 12)) {
      CHECK_FALSE(q.forged);
      CHECK((q.query_subject == q.subject) == q.genuine);
    }
  }
  SUBCASE("too few enrollment images") {
    CHECK_THROWS_AS(sample_eval_queries(DummySubjects(2, true), 10, 7, 1), Error);
  }
}

TEST_CASE("enrollment") {
  const SynthClass& cls = Corpus()[0];
  const std::vector<ImageSample> images(cls.genuine.begin(), cls.genuine.begin() + 8);
  EnrollConfig cfg;
  cfg.seed = 21;
  const SubjectModel a = enroll_subject(cls.id, images, cfg);
  const SubjectModel b = enroll_subject(cls.id, images, cfg);
  CHECK(a == b);
  CHECK(a.enrollment_count == 8);
  CHECK(a.blank_images == 0);
  CHECK(a.supports.size() == 5);
  CHECK(a.config_fingerprint == cfg.fingerprint());
  CHECK(a.pca.dims() == a.codebook.k());

  SUBCASE("nu bounds the training outlier fraction") {
    std::size_t outliers = 0;
    // Free support vectors sit on the boundary only up to the KKT tolerance.
    for (const ImageSample& img : images) outliers += decision_distance(a, img) < -10 * cfg.ocsvm.tolerance;
    CHECK(static_cast<double>(outliers) <= cfg.ocsvm.nu * images.size() + 1e-9);
    CHECK(static_cast<double>(a.ocsvm.support_vectors.size()) >= cfg.ocsvm.nu * images.size());
  }
  SUBCASE("blank images are excluded and counted") {
    std::vector<ImageSample> with_blank = images;
    with_blank.push_back(MakeImage(Tensor({1, 128, 128}, 1.0)));
    const SubjectModel m = enroll_subject(cls.id, with_blank, cfg);
    CHECK(m.blank_images == 1);
    CHECK(m.enrollment_count == 9);
    const QueryFeature q = subject_feature(m, with_blank.back());
    CHECK(q.blank);
    CHECK(q.feature.values.size() == m.pca.retained_dims);
  }
  SUBCASE("too few images") {
    const std::vector<ImageSample> few(images.begin(), images.begin() + 4);
    CHECK_THROWS_AS(enroll_subject(cls.id, few, cfg), Error);
    std::vector<ImageSample> blanks(6, MakeImage(Tensor({1, 128, 128}, 1.0)));
    CHECK_THROWS_AS(enroll_subject(cls.id, blanks, cfg), Error);
  }
  SUBCASE("fingerprint tracks settings") {
    EnrollConfig other = cfg;
    other.ocsvm.nu = 0.2;
    CHECK(other.fingerprint() != cfg.fingerprint());
    CHECK(EnrollConfig{}.fingerprint() == EnrollConfig{}.fingerprint());
  }
}

TEST_CASE("verify takes the maximum relation score over supports") {
  const SynthClass& cls = Corpus()[1];
  EnrollConfig cfg;
  const SubjectModel model = enroll_subject(cls.id, {cls.genuine.begin(), cls.genuine.begin() + 6}, cfg);
  const RelationNetWeights net = SmallNet();
  const std::vector<ImageSample> supports(cls.genuine.begin(), cls.genuine.begin() + 3);
  const ImageSample& query = cls.forged[0];
  const VerificationVerdict v = verify(model, net, supports, query);
  double best = 0.0;
  for (const ImageSample& s : supports) {
    const Tensor pair = concat_pair(encode(net, normalize_input(s)), encode(net, normalize_input(query)));
    best = std::max(best, relation_score(net, pair));
  }
  CHECK(v.relation == doctest::Approx(best).epsilon(1e-12));
  CHECK(v.support_size == 3);
  CHECK(v.distance == doctest::Approx(decision_distance(model, query)).epsilon(1e-12));
  CHECK(v.genuine == (v.relation > v.confidence));
  CHECK_THROWS_AS(verify(model, net, {}, query), Error);
}

TEST_CASE("hybrid verifier agrees with verify") {
  std::vector<EvalSubject> subjects;
  std::vector<SubjectModel> models;
  EnrollConfig cfg;
  for (std::size_t c = 0; c < 2; ++c) {
    const SynthClass& cls = Corpus()[c];
    EvalSubject s;
    s.id = cls.id;
    s.enrollment.assign(cls.genuine.begin(), cls.genuine.begin() + 6);
    s.genuine_queries.assign(cls.genuine.begin() + 6, cls.genuine.end());
    s.forged = cls.forged;
    models.push_back(enroll_subject(s.id, s.enrollment, cfg));
    subjects.push_back(std::move(s));
  }
  const RelationNetWeights net = SmallNet();
  const Verifier hybrid = MakeHybridVerifier(subjects, models, net);
  for (const EvalQuery& q : sample_eval_queries(subjects, 6, 2, 5)) {
    const VerifierOutcome o = hybrid(q);
    std::vector<ImageSample> sup;
    for (std::size_t i : q.supports) sup.push_back(subjects[q.subject].enrollment[i]);
    const EvalSubject& qs = subjects[q.query_subject];
    const ImageSample& img = q.forged ? qs.forged[q.query_index] : qs.genuine_queries[q.query_index];
    const VerificationVerdict v = verify(models[q.subject], net, sup, img);
    CHECK(o.score == doctest::Approx(v.relation).epsilon(1e-12));
    CHECK(o.accept == v.genuine);
  }
}
