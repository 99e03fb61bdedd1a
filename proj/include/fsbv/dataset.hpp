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
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fsbv/image.hpp"
#include "fsbv/relation_net.hpp"
#include "fsbv/verification.hpp"

namespace fsbv {

enum class Split { kTrain, kVal, kTest };

const char* SplitName(Split split);
Split ParseSplit(const std::string& text);

struct SubjectEntry {
  std::string id;
  std::vector<std::filesystem::path> genuine;
  std::vector<std::filesystem::path> forged;
  Split split = Split::kTrain;
};

struct DatasetManifest {
  std::filesystem::path root;
  std::vector<SubjectEntry> subjects;  // sorted by id
  std::size_t channels = 1;

  std::vector<const SubjectEntry*> in_split(Split split) const;
  const SubjectEntry& subject(const std::string& id) const;
  std::size_t genuine_count() const;
  std::size_t forged_count() const;

  bool operator==(const DatasetManifest&) const = default;
};

inline bool operator==(const SubjectEntry& a, const SubjectEntry& b) {
  return a.id == b.id && a.genuine == b.genuine && a.forged == b.forged && a.split == b.split;
}

/// Name of the optional per-dataset split file: "<subject_id> train|val|test" per line.
inline constexpr const char* kSplitFileName = "splits.txt";

struct LayoutConfig {
  std::size_t channels = 1;
  double test_fraction = 0.25;
  double val_fraction = 0.125;
  std::optional<std::filesystem::path> split_file;  // defaults to root/splits.txt if present
};

/// Scans root/<id>/genuine/*.png and root/<id>/forged/*.png.
///
/// Without a split file the last round(test_fraction * S) subjects (at least one) in
/// lexicographic order form the test split, the preceding round(val_fraction * S) (at
/// least one) the validation split, and the rest train.
DatasetManifest load_dataset(const std::filesystem::path& root, const LayoutConfig& layout = {});

struct LoadedSubject {
  std::string id;
  std::vector<ImageSample> genuine;  // standardized
  std::vector<ImageSample> forged;
};

/// Decodes and standardizes every image of one subject.
LoadedSubject load_subject(const SubjectEntry& entry, std::size_t channels);
std::vector<LoadedSubject> load_split(const DatasetManifest& manifest, Split split);

/// Network inputs for episodic training.
SubjectImages ToNetworkInputs(const LoadedSubject& subject);
std::vector<SubjectImages> ToNetworkInputs(const std::vector<LoadedSubject>& subjects);

/// Genuine images are split in order: the first ceil(n/2) enroll, the rest are queries.
EvalSubject MakeEvalSubject(const LoadedSubject& subject);
std::vector<ImageSample> EnrollmentImages(const LoadedSubject& subject);

}  // namespace fsbv
