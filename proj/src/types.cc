// Copyright (c) 2026 TOLD Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "told/types.h"

#include <cstring>
#include <fstream>

namespace told {

namespace {

constexpr char kLabelsMagic[8] = {'T', 'O', 'L', 'D', 'L', 'A', 'B', 'S'};

template <typename T>
void write_pod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw IoError("labels container: truncated file");
  return v;
}

void write_string(std::ostream& os, const std::string& s) {
  write_pod<uint32_t>(os, static_cast<uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& is) {
  uint32_t n = read_pod<uint32_t>(is);
  std::string s(n, '\0');
  is.read(s.data(), n);
  if (!is) throw IoError("labels container: truncated string");
  return s;
}

}  // namespace

void write_labels(const std::string& path, const ActivityMatrix& labels) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path);
  os.write(kLabelsMagic, sizeof(kLabelsMagic));
  write_pod<uint32_t>(os, 1);  // version
  write_pod<uint32_t>(os, static_cast<uint32_t>(labels.frames));
  write_pod<uint32_t>(os, static_cast<uint32_t>(labels.speakers));
  write_pod<double>(os, labels.frame_period);
  write_pod<uint32_t>(os, static_cast<uint32_t>(labels.speaker_ids.size()));
  for (const auto& id : labels.speaker_ids) write_string(os, id);
  os.write(reinterpret_cast<const char*>(labels.bits.data()),
           static_cast<std::streamsize>(labels.bits.size()));
  if (!os) throw IoError("write failed: " + path);
}

ActivityMatrix read_labels(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open for reading: " + path);
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kLabelsMagic, sizeof(magic)) != 0)
    throw IoError("not a labels container: " + path);
  uint32_t version = read_pod<uint32_t>(is);
  if (version != 1) throw IoError("unsupported labels version");
  uint32_t t = read_pod<uint32_t>(is);
  uint32_t s = read_pod<uint32_t>(is);
  ActivityMatrix labels(static_cast<int>(t), static_cast<int>(s));
  labels.frame_period = read_pod<double>(is);
  uint32_t n_ids = read_pod<uint32_t>(is);
  labels.speaker_ids.resize(n_ids);
  for (uint32_t i = 0; i < n_ids; ++i) labels.speaker_ids[i] = read_string(is);
  is.read(reinterpret_cast<char*>(labels.bits.data()),
          static_cast<std::streamsize>(labels.bits.size()));
  if (!is) throw IoError("labels container: truncated payload");
  return labels;
}

}  // namespace told
