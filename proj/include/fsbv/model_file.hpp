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

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "fsbv/config.hpp"
#include "fsbv/relation_net.hpp"
#include "fsbv/verification.hpp"

namespace fsbv {

// Layout, all little-endian:
//   "FSBV" | u16 version | u16 reserved | u32 section count
//   per section: u32 tag | u32 crc32 | u64 offset | u64 length
//   section payloads
inline constexpr std::uint16_t kModelFormatVersion = 1;

enum SectionTag : std::uint32_t {
  kSectionConfig = 1,   // canonical key=value text
  kSectionWeights = 2,  // relation network, float32 payload
  kSectionSubject = 3,  // one enrolled subject, float64 payload
};

struct RawSection {
  std::uint32_t tag = 0;
  std::string payload;
};

std::string EncodeSections(const std::vector<RawSection>& sections,
                           std::uint16_t version = kModelFormatVersion);
/// Validates magic, version and every checksum. Truncation is a checksum error.
std::vector<RawSection> DecodeSections(std::string_view bytes, const std::string& source = "<model>");

struct ModelFile {
  Config config;
  RelationNetWeights weights;
  std::vector<SubjectModel> subjects;

  const SubjectModel* find_subject(const std::string& id) const;
  /// Replaces the subject with the same id, or appends it.
  void upsert_subject(SubjectModel subject);

  bool operator==(const ModelFile& other) const;
};

/// Weights are stored as float32, so they are rounded in the encoded copy.
std::string EncodeModel(const ModelFile& model);
/// Unknown section tags are skipped.
ModelFile DecodeModel(std::string_view bytes, const std::string& source = "<model>");

void save_model(const std::filesystem::path& path, const ModelFile& model);
ModelFile load_model(const std::filesystem::path& path);

/// Writes to a sibling temporary file, then renames over `path`.
void WriteFileAtomic(const std::filesystem::path& path, std::string_view bytes);
std::string ReadFileBytes(const std::filesystem::path& path);

}  // namespace fsbv
