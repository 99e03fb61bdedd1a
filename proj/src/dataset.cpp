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

#include "fsbv/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "fsbv/error.hpp"

namespace fsbv {
namespace fs = std::filesystem;
namespace {

bool IsPng(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png";
}

// Sorted PNG files of one directory; a missing directory is empty.
std::vector<fs::path> ListPngs(const fs::path& dir) {
  std::vector<fs::path> out;
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) return out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && IsPng(e.path())) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

void CheckSignature(const fs::path& p) {
  static constexpr unsigned char kSig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  std::ifstream in(p, std::ios::binary);
  unsigned char head[8] = {};
  in.read(reinterpret_cast<char*>(head), 8);
  if (in.gcount() != 8 || !std::equal(head, head + 8, kSig)) {
    Fail(ErrorKind::kDecode, "load_dataset: undecodable PNG " + p.string());
  }
}

std::map<std::string, Split> ReadSplitFile(const fs::path& path) {
  std::ifstream in(path);
  if (!in) Fail(ErrorKind::kIo, "load_dataset: cannot read split file " + path.string());
  std::map<std::string, Split> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    std::string id, split, extra;
    if (!(ls >> id)) continue;
    if (!(ls >> split) || (ls >> extra)) {
      Fail(ErrorKind::kInvalidArgument, path.string() + ":" + std::to_string(lineno) +
                                            ": expected '<subject> train|val|test'");
    }
    out[id] = ParseSplit(split);
  }
  return out;
}

}  // namespace

const char* SplitName(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "train";
}

Split ParseSplit(const std::string& text) {
  if (text == "train") return Split::kTrain;
  if (text == "val") return Split::kVal;
  if (text == "test") return Split::kTest;
  Fail(ErrorKind::kInvalidArgument, "unknown split '" + text + "' (expected train, val or test)");
}

std::vector<const SubjectEntry*> DatasetManifest::in_split(Split split) const {
  std::vector<const SubjectEntry*> out;
  for (const SubjectEntry& s : subjects) {
    if (s.split == split) out.push_back(&s);
  }
  return out;
}

const SubjectEntry& DatasetManifest::subject(const std::string& id) const {
  for (const SubjectEntry& s : subjects) {
    if (s.id == id) return s;
  }
  Fail(ErrorKind::kNotFound, "subject '" + id + "' not found under " + root.string());
}

std::size_t DatasetManifest::genuine_count() const {
  std::size_t n = 0;
  for (const SubjectEntry& s : subjects) n += s.genuine.size();
  return n;
}

std::size_t DatasetManifest::forged_count() const {
  std::size_t n = 0;
  for (const SubjectEntry& s : subjects) n += s.forged.size();
  return n;
}

DatasetManifest load_dataset(const fs::path& root, const LayoutConfig& layout) {
  if (layout.channels != 1 && layout.channels != 3) {
    Fail(ErrorKind::kInvalidArgument, "load_dataset: channels must be 1 or 3");
  }
  std::error_code ec;
  if (!fs::is_directory(root, ec)) {
    Fail(ErrorKind::kNotFound, "load_dataset: dataset root " + root.string() + " does not exist");
  }
  DatasetManifest m;
  m.root = root;
  m.channels = layout.channels;
  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(root)) {
    if (e.is_directory()) dirs.push_back(e.path());
  }
  std::sort(dirs.begin(), dirs.end());
  for (const fs::path& dir : dirs) {
    SubjectEntry s;
    s.id = dir.filename().string();
    s.genuine = ListPngs(dir / "genuine");
    s.forged = ListPngs(dir / "forged");
    if (s.genuine.empty()) {
      Fail(ErrorKind::kInsufficientData,
           "load_dataset: subject " + s.id + " has zero genuine images in " + (dir / "genuine").string());
    }
    for (const auto& p : s.genuine) CheckSignature(p);
    for (const auto& p : s.forged) CheckSignature(p);
    m.subjects.push_back(std::move(s));
  }
  if (m.subjects.empty()) Fail(ErrorKind::kNotFound, "no subjects found under " + root.string());

  std::optional<fs::path> split_path = layout.split_file;
  if (!split_path && fs::is_regular_file(root / kSplitFileName, ec)) split_path = root / kSplitFileName;
  if (split_path) {
    const auto splits = ReadSplitFile(*split_path);
    for (const auto& [id, split] : splits) {
      auto it = std::find_if(m.subjects.begin(), m.subjects.end(),
                             [&](const SubjectEntry& s) { return s.id == id; });
      if (it == m.subjects.end()) {
        Fail(ErrorKind::kNotFound, split_path->string() + ": unknown subject '" + id + "'");
      }
      it->split = split;
    }
  } else {
    const std::size_t n = m.subjects.size();
    const auto count = [n](double fraction) {
      return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(fraction * n)));
    };
    const std::size_t n_test = std::min(n, count(layout.test_fraction));
    const std::size_t n_val = std::min(n - n_test, count(layout.val_fraction));
    for (std::size_t i = 0; i < n; ++i) {
      if (i >= n - n_test) {
        m.subjects[i].split = Split::kTest;
      } else if (i >= n - n_test - n_val) {
        m.subjects[i].split = Split::kVal;
      }
    }
  }
  return m;
}

LoadedSubject load_subject(const SubjectEntry& entry, std::size_t channels) {
  LoadedSubject out;
  out.id = entry.id;
  for (const auto& p : entry.genuine) {
    ImageSample img = standardize(ReadPng(p), channels);
    img.subject_id = entry.id;
    img.label = Genuineness::kGenuine;
    out.genuine.push_back(std::move(img));
  }
  for (const auto& p : entry.forged) {
    ImageSample img = standardize(ReadPng(p), channels);
    img.subject_id = entry.id;
    img.label = Genuineness::kForged;
    out.forged.push_back(std::move(img));
  }
  return out;
}

std::vector<LoadedSubject> load_split(const DatasetManifest& manifest, Split split) {
  std::vector<LoadedSubject> out;
  for (const SubjectEntry* s : manifest.in_split(split)) out.push_back(load_subject(*s, manifest.channels));
  return out;
}

SubjectImages ToNetworkInputs(const LoadedSubject& subject) {
  SubjectImages out;
  out.id = subject.id;
  for (const ImageSample& img : subject.genuine) out.genuine.push_back(normalize_input(img));
  for (const ImageSample& img : subject.forged) out.forged.push_back(normalize_input(img));
  return out;
}

std::vector<SubjectImages> ToNetworkInputs(const std::vector<LoadedSubject>& subjects) {
  std::vector<SubjectImages> out;
  for (const LoadedSubject& s : subjects) out.push_back(ToNetworkInputs(s));
  return out;
}

std::vector<ImageSample> EnrollmentImages(const LoadedSubject& subject) {
  const std::size_t n = (subject.genuine.size() + 1) / 2;
  return {subject.genuine.begin(), subject.genuine.begin() + static_cast<std::ptrdiff_t>(n)};
}

EvalSubject MakeEvalSubject(const LoadedSubject& subject) {
  EvalSubject out;
  out.id = subject.id;
  out.enrollment = EnrollmentImages(subject);
  out.genuine_queries.assign(subject.genuine.begin() + static_cast<std::ptrdiff_t>(out.enrollment.size()),
                             subject.genuine.end());
  out.forged = subject.forged;
  return out;
}

}  // namespace fsbv
