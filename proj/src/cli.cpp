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

#include "fsbv/cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "fsbv/config.hpp"
#include "fsbv/dataset.hpp"
#include "fsbv/error.hpp"
#include "fsbv/model_file.hpp"
#include "fsbv/synth.hpp"
#include "fsbv/verification.hpp"

namespace fsbv {
namespace {

LayoutConfig Layout(std::size_t channels) {
  LayoutConfig layout;
  layout.channels = channels;
  return layout;
}

std::string Quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    out += c;
  }
  return out + "\"";
}

std::string Num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

struct Common {
  std::string config_file;
  std::vector<std::string> sets;
};

void AddCommon(CLI::App* app, Common& c) {
  app->add_option("--config", c.config_file, "Flat key = value config file");
  app->add_option("--set", c.sets, "Override one config key (key=value); repeatable");
}

Config Overrides(const Common& c) {
  Config out;
  if (!c.config_file.empty()) out = Config::Load(c.config_file);
  for (const std::string& kv : c.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) {
      Fail(ErrorKind::kInvalidArgument, "--set expects key=value, got '" + kv + "'");
    }
    out.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  return out;
}

// Settings stored in a model, then the config file, then --set.
SystemConfig Effective(const Config& stored, const Common& c) {
  Config merged = stored;
  merged.merge(Overrides(c));
  return SystemConfig::FromConfig(merged);
}

ProgressFn Progress(std::ostream& out, const char* stage, std::size_t every) {
  return [&out, stage, every](const ProgressRecord& r) {
    if (r.validation_accuracy || (every > 0 && r.episode % every == 0)) {
      out << "progress stage=" << stage << " episode=" << r.episode << " loss=" << Num(r.loss);
      if (r.validation_accuracy) out << " val_acc=" << Num(*r.validation_accuracy);
      out << "\n" << std::flush;
    }
  };
}

std::vector<SubjectImages> NetworkSplit(const DatasetManifest& m, Split split) {
  return ToNetworkInputs(load_split(m, split));
}

void RequireSupportK(std::size_t k) {
  if (k == 0) Fail(ErrorKind::kInvalidArgument, "--support-k must be positive");
}

// Model subjects whose fingerprint matches the current settings are reused;
// the rest are enrolled from their first genuine half.
std::vector<SubjectModel> ModelsFor(const std::vector<LoadedSubject>& subjects,
                                    const ModelFile& model, const EnrollConfig& enroll) {
  std::vector<SubjectModel> out;
  for (const LoadedSubject& s : subjects) {
    const SubjectModel* stored = model.find_subject(s.id);
    if (stored != nullptr && stored->config_fingerprint == enroll.fingerprint()) {
      out.push_back(*stored);
    } else {
      out.push_back(enroll_subject(s.id, EnrollmentImages(s), enroll));
    }
  }
  return out;
}

std::string HumanTable(const MetricsReport& r) {
  std::ostringstream t;
  t << std::fixed << std::setprecision(4);
  t << "metric      value\n"
    << "accuracy    " << r.accuracy << "\n"
    << "far         " << r.far << "\n"
    << "frr         " << r.frr << "\n"
    << "eer         " << r.eer << "\n"
    << "far_global  " << r.far_global << "\n"
    << "tp/tn/fp/fn " << r.tp << "/" << r.tn << "/" << r.fp << "/" << r.fn << "\n";
  return t.str();
}

}  // namespace

int cli_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Few-shot biometric verification", "fsbv"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  Common common;

  // synth
  SynthSpec synth;
  std::string synth_out;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic stroke dataset");
  synth_cmd->add_option("--out", synth_out, "Output directory")->required();
  synth_cmd->add_option("--classes", synth.classes)->capture_default_str();
  synth_cmd->add_option("--genuine", synth.genuine)->capture_default_str();
  synth_cmd->add_option("--forged", synth.forged)->capture_default_str();
  synth_cmd->add_option("--seed", synth.seed)->capture_default_str();
  synth_cmd->add_option("--genuine-jitter", synth.genuine_jitter)->capture_default_str();
  synth_cmd->add_option("--forged-jitter", synth.forged_jitter)->capture_default_str();

  // train
  TrainOptions train;
  std::string data_dir, model_path, out_path;
  std::size_t progress_every = 10;
  auto* train_cmd = app.add_subcommand("train", "Episodic relation network training");
  train_cmd->add_option("--data", data_dir, "Dataset root")->required();
  train_cmd->add_option("--out", out_path, "Model file to write")->required();
  train_cmd->add_option("--episodes", train.episodes)->capture_default_str();
  train_cmd->add_option("--way", train.way)->capture_default_str();
  train_cmd->add_option("--shot", train.shot)->capture_default_str();
  train_cmd->add_option("--queries", train.queries)->capture_default_str();
  train_cmd->add_option("--seed", train.seed)->capture_default_str();
  train_cmd->add_option("--lr", train.adam.learning_rate)->capture_default_str();
  train_cmd->add_option("--validate-every", train.validate_every)->capture_default_str();
  train_cmd->add_option("--validation-trials", train.validation_trials)->capture_default_str();
  train_cmd->add_option("--progress-every", progress_every)->capture_default_str();
  AddCommon(train_cmd, common);

  // finetune
  FinetuneOptions ft;
  std::string freeze = "encoder";
  auto* ft_cmd = app.add_subcommand("finetune", "Forgery fine-tuning of a trained model");
  ft_cmd->add_option("--data", data_dir, "Dataset root")->required();
  ft_cmd->add_option("--model", model_path, "Trained model file")->required();
  ft_cmd->add_option("--out", out_path, "Output model file (default: overwrite --model)");
  ft_cmd->add_option("--episodes", ft.episodes)->capture_default_str();
  ft_cmd->add_option("--way", ft.way)->capture_default_str();
  ft_cmd->add_option("--shot", ft.shot)->capture_default_str();
  ft_cmd->add_option("--queries", ft.queries)->capture_default_str();
  ft_cmd->add_option("--freeze", freeze, "none, encoder or all")->capture_default_str();
  ft_cmd->add_option("--seed", ft.seed)->capture_default_str();
  ft_cmd->add_option("--lr", ft.adam.learning_rate)->capture_default_str();
  ft_cmd->add_option("--validate-every", ft.validate_every)->capture_default_str();
  ft_cmd->add_option("--validation-trials", ft.validation_trials)->capture_default_str();
  ft_cmd->add_option("--progress-every", progress_every)->capture_default_str();

  // enroll
  std::string subject;
  auto* enroll_cmd = app.add_subcommand("enroll", "Fit a subject's one-class model");
  enroll_cmd->add_option("--data", data_dir, "Dataset root")->required();
  enroll_cmd->add_option("--subject", subject, "Subject id")->required();
  enroll_cmd->add_option("--model", model_path, "Model file to update")->required();
  AddCommon(enroll_cmd, common);

  // verify
  std::string query_path;
  std::size_t support_k = 5;
  auto* verify_cmd = app.add_subcommand("verify", "Verify one query image against a subject");
  verify_cmd->add_option("--model", model_path, "Model file")->required();
  verify_cmd->add_option("--subject", subject, "Enrolled subject id")->required();
  verify_cmd->add_option("--query", query_path, "Query PNG")->required();
  verify_cmd->add_option("--support-k", support_k)->capture_default_str();
  AddCommon(verify_cmd, common);

  // evaluate
  std::size_t episodes = 200;
  std::uint64_t seed = 0;
  std::string report_path, split_name = "test";
  auto* eval_cmd = app.add_subcommand("evaluate", "Episodic evaluation on a dataset split");
  eval_cmd->add_option("--model", model_path, "Model file")->required();
  eval_cmd->add_option("--data", data_dir, "Dataset root")->required();
  eval_cmd->add_option("--episodes", episodes)->capture_default_str();
  eval_cmd->add_option("--support-k", support_k)->capture_default_str();
  eval_cmd->add_option("--seed", seed)->capture_default_str();
  eval_cmd->add_option("--report", report_path, "Key-value report file");
  eval_cmd->add_option("--split", split_name, "train, val or test")->capture_default_str();
  AddCommon(eval_cmd, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    CLI::App* failed = &app;
    for (CLI::App* sub : app.get_subcommands()) failed = sub;
    err << failed->help();
    err << "error kind=usage message=" << Quote(e.what()) << "\n";
    return 2;
  }

  const auto start = std::chrono::steady_clock::now();
  auto seconds = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };
  try {
    if (synth_cmd->parsed()) {
      const DatasetManifest m = synth_generate(synth, synth_out);
      out << "synth out=" << Quote(synth_out) << " subjects=" << m.subjects.size()
          << " genuine=" << m.genuine_count() << " forged=" << m.forged_count() << "\n";
    } else if (train_cmd->parsed()) {
      const SystemConfig sys = Effective(Config(), common);
      const DatasetManifest m = load_dataset(data_dir, Layout(sys.net.input_channels));
      const auto train_set = NetworkSplit(m, Split::kTrain);
      const auto val_set = NetworkSplit(m, Split::kVal);
      ModelFile model;
      model.config = sys.to_config();
      model.weights = RelationNetWeights::Initialize(sys.net, train.seed);
      const TrainReport report =
          train_relation_net(model.weights, train_set, val_set, train, Progress(out, "train", progress_every));
      save_model(out_path, model);
      out << "train out=" << Quote(out_path) << " episodes=" << train.episodes
          << " final_loss=" << Num(report.losses.empty() ? 0.0 : report.losses.back());
      if (report.best) {
        out << " best_episode=" << report.best->episode << " best_val_acc=" << Num(report.best->accuracy);
      }
      out << " seconds=" << Num(seconds()) << "\n";
    } else if (ft_cmd->parsed()) {
      ModelFile model = load_model(model_path);
      ft.freeze = ParseFreezePolicy(freeze);
      const DatasetManifest m = load_dataset(data_dir, Layout(model.weights.config.input_channels));
      const auto train_set = NetworkSplit(m, Split::kTrain);
      const auto val_set = NetworkSplit(m, Split::kVal);
      const TrainReport report = finetune_forgery(model.weights, train_set, val_set, ft,
                                                  Progress(out, "finetune", progress_every));
      const std::string dest = out_path.empty() ? model_path : out_path;
      save_model(dest, model);
      out << "finetune out=" << Quote(dest) << " episodes=" << ft.episodes << " freeze=" << freeze
          << " final_loss=" << Num(report.losses.empty() ? 0.0 : report.losses.back());
      if (report.best) {
        out << " best_episode=" << report.best->episode << " best_val_acc=" << Num(report.best->accuracy);
      }
      out << " seconds=" << Num(seconds()) << "\n";
    } else if (enroll_cmd->parsed()) {
      ModelFile model = load_model(model_path);
      const SystemConfig sys = Effective(model.config, common);
      model.config = sys.to_config();
      const DatasetManifest m = load_dataset(data_dir, Layout(sys.net.input_channels));
      const LoadedSubject s = load_subject(m.subject(subject), m.channels);
      SubjectModel sm = enroll_subject(subject, EnrollmentImages(s), sys.enroll);
      out << "enroll subject=" << subject << " images=" << sm.enrollment_count
          << " blank=" << sm.blank_images << " clusters=" << sm.codebook.k()
          << " pca_dims=" << sm.pca.retained_dims << " support_vectors=" << sm.ocsvm.support_vectors.size()
          << " rho=" << Num(sm.ocsvm.rho) << "\n";
      model.upsert_subject(std::move(sm));
      save_model(model_path, model);
    } else if (verify_cmd->parsed()) {
      RequireSupportK(support_k);
      const ModelFile model = load_model(model_path);
      const SystemConfig sys = Effective(model.config, common);
      const SubjectModel* sm = model.find_subject(subject);
      if (sm == nullptr) {
        Fail(ErrorKind::kNotFound, "subject '" + subject + "' is not enrolled in " + model_path);
      }
      if (sm->supports.size() < support_k) {
        Fail(ErrorKind::kInsufficientData, "subject '" + subject + "' stores " +
                                               std::to_string(sm->supports.size()) +
                                               " support images, --support-k is " + std::to_string(support_k));
      }
      const std::vector<ImageSample> supports(sm->supports.begin(),
                                              sm->supports.begin() + static_cast<std::ptrdiff_t>(support_k));
      const ImageSample query = standardize(ReadPng(query_path), sys.net.input_channels);
      const VerificationVerdict v = verify(*sm, model.weights, supports, query, sys.scaling, sys.enroll.orb);
      out << "verdict subject=" << subject << " decision=" << (v.genuine ? "genuine" : "impostor")
          << " relation=" << Num(v.relation) << " confidence=" << Num(v.confidence)
          << " distance=" << Num(v.distance) << " support_k=" << v.support_size
          << " blank_query=" << (v.blank_query ? 1 : 0) << "\n";
    } else if (eval_cmd->parsed()) {
      RequireSupportK(support_k);
      const ModelFile model = load_model(model_path);
      const SystemConfig sys = Effective(model.config, common);
      const DatasetManifest m = load_dataset(data_dir, Layout(model.weights.config.input_channels));
      const auto loaded = load_split(m, ParseSplit(split_name));
      if (loaded.empty()) Fail(ErrorKind::kInsufficientData, "evaluate: split " + split_name + " is empty");
      std::vector<EvalSubject> subjects;
      for (const LoadedSubject& s : loaded) subjects.push_back(MakeEvalSubject(s));
      const auto models = ModelsFor(loaded, model, sys.enroll);
      const Verifier verifier = MakeHybridVerifier(subjects, models, model.weights, sys.scaling, sys.enroll.orb);
      const MetricsReport report = evaluate_episodes(subjects, verifier, episodes, support_k, seed);
      if (!report_path.empty()) WriteFileAtomic(report_path, report.to_kv());
      out << HumanTable(report);
      out << "evaluate episodes=" << episodes << " support_k=" << support_k << " seed=" << seed
          << " accuracy=" << Num(report.accuracy) << " far=" << Num(report.far)
          << " frr=" << Num(report.frr) << " eer=" << Num(report.eer)
          << " far_global=" << Num(report.far_global) << " seconds=" << Num(seconds()) << "\n";
    }
  } catch (const Error& e) {
    err << "error kind=" << ErrorKindName(e.kind()) << " message=" << Quote(e.what()) << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error kind=internal message=" << Quote(e.what()) << "\n";
    return 1;
  }
  return 0;
}

}  // namespace fsbv
