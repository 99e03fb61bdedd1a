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

#include "fsbv/model_file.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "fsbv/error.hpp"

namespace fsbv {
namespace {

constexpr char kMagic[4] = {'F', 'S', 'B', 'V'};
constexpr std::size_t kHeaderSize = 12;
constexpr std::size_t kEntrySize = 24;

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
  void u16(std::uint16_t v) { le(v, 2); }
  void u32(std::uint32_t v) { le(v, 4); }
  void u64(std::uint64_t v) { le(v, 8); }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    out_ += s;
  }
  void raw(std::string_view s) { out_ += s; }
  void f64s(const std::vector<double>& v) {
    u64(v.size());
    for (double x : v) f64(x);
  }
  void tensor64(const Tensor& t) {
    u32(static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) u64(d);
    for (std::size_t i = 0; i < t.size(); ++i) f64(t[i]);
  }
  void tensor32(const Tensor& t) {
    u32(static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) u64(d);
    for (std::size_t i = 0; i < t.size(); ++i) f32(static_cast<float>(t[i]));
  }
  std::string& bytes() { return out_; }

 private:
  void le(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  std::string out_;
};

class Reader {
 public:
  Reader(std::string_view in, std::string context) : in_(in), context_(std::move(context)) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(take(1)[0]); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(le(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
  std::uint64_t u64() { return le(8); }
  float f32() { return std::bit_cast<float>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const std::uint32_t n = u32();
    return std::string(take(n));
  }
  std::vector<double> f64s() {
    const std::uint64_t n = count(8);
    std::vector<double> v(n);
    for (double& x : v) x = f64();
    return v;
  }
  Tensor tensor(bool single) {
    const std::uint32_t rank = u32();
    if (rank > 8) fail("tensor rank " + std::to_string(rank));
    if (rank == 0) return Tensor();
    Shape shape(rank);
    std::uint64_t total = 1;
    for (auto& d : shape) {
      d = u64();
      total *= d;
      if (total > in_.size()) fail("tensor larger than the section");
    }
    Tensor t(shape);
    for (std::size_t i = 0; i < t.size(); ++i) t.data()[i] = single ? f32() : f64();
    return t;
  }
  /// Element count checked against the remaining bytes.
  std::uint64_t count(std::size_t element_size) {
    const std::uint64_t n = u64();
    if (n > (in_.size() - pos_) / element_size) fail("count exceeds the section");
    return n;
  }
  bool done() const { return pos_ == in_.size(); }
  [[noreturn]] void fail(const std::string& what) const {
    Fail(ErrorKind::kDecode, context_ + ": malformed section: " + what);
  }

 private:
  std::string_view take(std::size_t n) {
    if (n > in_.size() - pos_) fail("unexpected end");
    auto s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::uint64_t le(int n) {
    const auto s = take(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(s[i])) << (8 * i);
    return v;
  }
  std::string_view in_;
  std::size_t pos_ = 0;
  std::string context_;
};

std::uint32_t Crc32(std::string_view s) {
  return static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(s.data()), static_cast<uInt>(s.size())));
}

std::vector<ConvBlock*> Blocks(RelationNetWeights& w) {
  return {&w.encoder[0], &w.encoder[1], &w.encoder[2], &w.encoder[3], &w.relation[0], &w.relation[1]};
}

std::string EncodeWeights(const RelationNetWeights& weights) {
  Writer w;
  const RelationNetConfig& c = weights.config;
  for (std::size_t v : {c.input_channels, c.input_size, c.width, c.hidden}) w.u32(static_cast<std::uint32_t>(v));
  const auto params = weights.parameters();
  w.u32(static_cast<std::uint32_t>(params.size()));
  for (const Parameter* p : params) w.tensor32(p->value);
  auto& mutable_weights = const_cast<RelationNetWeights&>(weights);
  for (ConvBlock* b : Blocks(mutable_weights)) {
    w.tensor32(b->stats.mean);
    w.tensor32(b->stats.var);
  }
  return std::move(w.bytes());
}

RelationNetWeights DecodeWeights(std::string_view payload, const std::string& source) {
  Reader r(payload, source);
  RelationNetConfig c;
  c.input_channels = r.u32();
  c.input_size = r.u32();
  c.width = r.u32();
  c.hidden = r.u32();
  try {
    c.validate();
  } catch (const Error& e) {
    r.fail(e.what());
  }
  RelationNetWeights w = RelationNetWeights::Initialize(c, 0);
  const auto params = w.parameters();
  if (r.u32() != params.size()) r.fail("parameter count");
  for (Parameter* p : params) {
    Tensor t = r.tensor(true);
    if (t.shape() != p->value.shape()) r.fail("shape of " + p->name);
    p->value = std::move(t);
  }
  for (ConvBlock* b : Blocks(w)) {
    b->stats.mean = r.tensor(true);
    b->stats.var = r.tensor(true);
  }
  if (!r.done()) r.fail("trailing bytes in weights");
  return w;
}

std::string EncodeSubject(const SubjectModel& m) {
  Writer w;
  w.str(m.subject_id);
  w.u64(m.enrollment_count);
  w.u64(m.blank_images);
  w.u64(m.config_fingerprint);
  w.u64(m.codebook.centroids.size());
  for (const RealVector& c : m.codebook.centroids) w.f64s(c);
  w.f64s(m.codebook.inertia_history);
  w.f64s(m.pca.mean);
  w.f64s(m.pca.components);
  w.f64s(m.pca.eigenvalues);
  w.u64(m.pca.retained_dims);
  w.u64(m.ocsvm.support_vectors.size());
  for (const RealVector& sv : m.ocsvm.support_vectors) w.f64s(sv);
  w.f64s(m.ocsvm.alphas);
  w.f64(m.ocsvm.rho);
  w.f64(m.ocsvm.gamma);
  w.f64(m.ocsvm.nu);
  w.u64(m.ocsvm.iterations);
  w.u64(m.supports.size());
  for (const ImageSample& s : m.supports) w.tensor64(s.pixels);
  return std::move(w.bytes());
}

SubjectModel DecodeSubject(std::string_view payload, const std::string& source) {
  Reader r(payload, source);
  SubjectModel m;
  m.subject_id = r.str();
  m.enrollment_count = r.u64();
  m.blank_images = r.u64();
  m.config_fingerprint = r.u64();
  m.codebook.centroids.resize(r.count(8));
  for (RealVector& c : m.codebook.centroids) c = r.f64s();
  m.codebook.inertia_history = r.f64s();
  m.pca.mean = r.f64s();
  m.pca.components = r.f64s();
  m.pca.eigenvalues = r.f64s();
  m.pca.retained_dims = r.u64();
  m.ocsvm.support_vectors.resize(r.count(8));
  for (RealVector& sv : m.ocsvm.support_vectors) sv = r.f64s();
  m.ocsvm.alphas = r.f64s();
  m.ocsvm.rho = r.f64();
  m.ocsvm.gamma = r.f64();
  m.ocsvm.nu = r.f64();
  m.ocsvm.iterations = r.u64();
  const std::uint64_t supports = r.count(4);
  for (std::uint64_t i = 0; i < supports; ++i) {
    Tensor t = r.tensor(false);
    if (t.rank() != 3) r.fail("support image rank");
    m.supports.push_back(MakeImage(std::move(t), m.subject_id, Genuineness::kGenuine));
  }
  if (!r.done()) r.fail("trailing bytes in subject " + m.subject_id);
  if (m.pca.components.size() != m.pca.retained_dims * m.pca.mean.size() ||
      m.ocsvm.alphas.size() != m.ocsvm.support_vectors.size()) {
    r.fail("inconsistent subject " + m.subject_id);
  }
  return m;
}

}  // namespace

std::string EncodeSections(const std::vector<RawSection>& sections, std::uint16_t version) {
  Writer w;
  w.raw(std::string_view(kMagic, 4));
  w.u16(version);
  w.u16(0);
  w.u32(static_cast<std::uint32_t>(sections.size()));
  std::uint64_t offset = kHeaderSize + kEntrySize * sections.size();
  for (const RawSection& s : sections) {
    w.u32(s.tag);
    w.u32(Crc32(s.payload));
    w.u64(offset);
    w.u64(s.payload.size());
    offset += s.payload.size();
  }
  for (const RawSection& s : sections) w.raw(s.payload);
  return std::move(w.bytes());
}

std::vector<RawSection> DecodeSections(std::string_view bytes, const std::string& source) {
  if (bytes.size() >= 4 && std::memcmp(bytes.data(), kMagic, 4) != 0) {
    Fail(ErrorKind::kBadMagic, source + ": not a model file (bad magic)");
  }
  if (bytes.size() < kHeaderSize) {
    Fail(ErrorKind::kChecksum, source + ": checksum failure: truncated header");
  }
  Reader header(bytes.substr(4, kHeaderSize - 4), source);
  const std::uint16_t version = header.u16();
  header.u16();
  const std::uint32_t count = header.u32();
  if (version > kModelFormatVersion) {
    Fail(ErrorKind::kUnsupportedVersion, source + ": format version " + std::to_string(version) +
                                             " is newer than supported version " +
                                             std::to_string(kModelFormatVersion));
  }
  if (bytes.size() - kHeaderSize < static_cast<std::uint64_t>(count) * kEntrySize) {
    Fail(ErrorKind::kChecksum, source + ": checksum failure: truncated section table");
  }
  Reader table(bytes.substr(kHeaderSize, static_cast<std::size_t>(count) * kEntrySize), source);
  std::vector<RawSection> out;
  for (std::uint32_t i = 0; i < count; ++i) {
    RawSection s;
    s.tag = table.u32();
    const std::uint32_t crc = table.u32();
    const std::uint64_t offset = table.u64();
    const std::uint64_t length = table.u64();
    if (offset > bytes.size() || length > bytes.size() - offset) {
      Fail(ErrorKind::kChecksum,
           source + ": checksum failure: section " + std::to_string(i) + " is truncated");
    }
    s.payload.assign(bytes.substr(offset, length));
    if (Crc32(s.payload) != crc) {
      Fail(ErrorKind::kChecksum,
           source + ": checksum failure in section " + std::to_string(i) + " (tag " + std::to_string(s.tag) + ")");
    }
    out.push_back(std::move(s));
  }
  return out;
}

const SubjectModel* ModelFile::find_subject(const std::string& id) const {
  for (const SubjectModel& s : subjects) {
    if (s.subject_id == id) return &s;
  }
  return nullptr;
}

void ModelFile::upsert_subject(SubjectModel subject) {
  for (SubjectModel& s : subjects) {
    if (s.subject_id == subject.subject_id) {
      s = std::move(subject);
      return;
    }
  }
  subjects.push_back(std::move(subject));
}

bool ModelFile::operator==(const ModelFile& other) const {
  return config.values() == other.config.values() && weights == other.weights &&
         subjects == other.subjects;
}

std::string EncodeModel(const ModelFile& model) {
  std::vector<RawSection> sections;
  sections.push_back({kSectionConfig, model.config.canonical()});
  sections.push_back({kSectionWeights, EncodeWeights(model.weights)});
  for (const SubjectModel& s : model.subjects) sections.push_back({kSectionSubject, EncodeSubject(s)});
  return EncodeSections(sections);
}

ModelFile DecodeModel(std::string_view bytes, const std::string& source) {
  ModelFile m;
  bool have_weights = false;
  for (const RawSection& s : DecodeSections(bytes, source)) {
    switch (s.tag) {
      case kSectionConfig:
        m.config = Config::Parse(s.payload, source);
        break;
      case kSectionWeights:
        m.weights = DecodeWeights(s.payload, source);
        have_weights = true;
        break;
      case kSectionSubject:
        m.subjects.push_back(DecodeSubject(s.payload, source));
        break;
      default:
        break;  // written by a newer version
    }
  }
  if (!have_weights) Fail(ErrorKind::kDecode, source + ": model file has no network weights");
  return m;
}

void WriteFileAtomic(const std::filesystem::path& path, std::string_view bytes) {
  const auto tmp = path.string() + ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) Fail(ErrorKind::kIo, "cannot write " + tmp);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      Fail(ErrorKind::kIo, "cannot write " + tmp);
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    Fail(ErrorKind::kIo, "cannot replace " + path.string() + ": " + ec.message());
  }
}

std::string ReadFileBytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorKind::kIo, "cannot read " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void save_model(const std::filesystem::path& path, const ModelFile& model) {
  WriteFileAtomic(path, EncodeModel(model));
}

ModelFile load_model(const std::filesystem::path& path) {
  return DecodeModel(ReadFileBytes(path), path.string());
}

}  // namespace fsbv
