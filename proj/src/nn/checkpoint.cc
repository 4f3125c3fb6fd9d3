// Copyright (c) 2026 TOLD Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "told/nn/checkpoint.h"

#include <cstring>
#include <fstream>

namespace told::nn {

namespace {

constexpr char kCkptMagic[8] = {'T', 'O', 'L', 'D', 'C', 'K', 'P', 'T'};

template <typename T>
void write_pod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw IoError("checkpoint: truncated file");
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
  if (!is) throw IoError("checkpoint: truncated string");
  return s;
}

}  // namespace

Checkpoint checkpoint_from_params(const ParamStore& store,
                                  const std::string& meta_json) {
  Checkpoint ckpt;
  ckpt.meta_json = meta_json;
  for (const auto& [name, tensor] : store.entries()) {
    CheckpointEntry e;
    e.name = name;
    e.rows = static_cast<uint32_t>(tensor.rows());
    e.cols = static_cast<uint32_t>(tensor.cols());
    e.data.resize(static_cast<size_t>(e.rows) * e.cols);
    const Mat& v = tensor.value();
    size_t idx = 0;
    for (int i = 0; i < v.rows(); ++i)
      for (int j = 0; j < v.cols(); ++j)
        e.data[idx++] = static_cast<float>(v(i, j));
    ckpt.entries.push_back(std::move(e));
  }
  return ckpt;
}

void load_into_params(const Checkpoint& ckpt, ParamStore& store) {
  require(ckpt.entries.size() == store.entries().size(),
          "checkpoint: parameter count mismatch");
  for (const auto& e : ckpt.entries) {
    require(store.has(e.name), "checkpoint: unknown parameter " + e.name);
    Tensor t = store.get(e.name);
    require(t.rows() == static_cast<int>(e.rows) &&
                t.cols() == static_cast<int>(e.cols),
            "checkpoint: shape mismatch for " + e.name);
    Mat& v = t.mutable_value();
    size_t idx = 0;
    for (int i = 0; i < v.rows(); ++i)
      for (int j = 0; j < v.cols(); ++j)
        v(i, j) = static_cast<double>(e.data[idx++]);
  }
}

void write_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path);
  os.write(kCkptMagic, sizeof(kCkptMagic));
  write_pod<uint32_t>(os, 1);  // version
  write_string(os, ckpt.meta_json);
  write_pod<uint32_t>(os, static_cast<uint32_t>(ckpt.entries.size()));
  for (const auto& e : ckpt.entries) {
    write_string(os, e.name);
    write_pod<uint32_t>(os, e.rows);
    write_pod<uint32_t>(os, e.cols);
    os.write(reinterpret_cast<const char*>(e.data.data()),
             static_cast<std::streamsize>(e.data.size() * sizeof(float)));
  }
  if (!os) throw IoError("write failed: " + path);
}

Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open for reading: " + path);
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kCkptMagic, sizeof(magic)) != 0)
    throw IoError("not a checkpoint file: " + path);
  uint32_t version = read_pod<uint32_t>(is);
  if (version != 1) throw IoError("unsupported checkpoint version");
  Checkpoint ckpt;
  ckpt.meta_json = read_string(is);
  uint32_t n = read_pod<uint32_t>(is);
  ckpt.entries.resize(n);
  for (uint32_t i = 0; i < n; ++i) {
    CheckpointEntry& e = ckpt.entries[i];
    e.name = read_string(is);
    e.rows = read_pod<uint32_t>(is);
    e.cols = read_pod<uint32_t>(is);
    e.data.resize(static_cast<size_t>(e.rows) * e.cols);
    is.read(reinterpret_cast<char*>(e.data.data()),
            static_cast<std::streamsize>(e.data.size() * sizeof(float)));
    if (!is) throw IoError("checkpoint: truncated payload");
  }
  return ckpt;
}

Checkpoint average_checkpoints(const std::vector<Checkpoint>& ckpts) {
  require(!ckpts.empty(), "average_checkpoints: empty list");
  const Checkpoint& first = ckpts.front();
  for (const auto& c : ckpts) {
    require(c.entries.size() == first.entries.size(),
            "average_checkpoints: table size mismatch");
    for (size_t i = 0; i < c.entries.size(); ++i) {
      require(c.entries[i].name == first.entries[i].name &&
                  c.entries[i].rows == first.entries[i].rows &&
                  c.entries[i].cols == first.entries[i].cols,
              "average_checkpoints: mismatched entry " + c.entries[i].name);
    }
  }
  Checkpoint out;
  out.meta_json = first.meta_json;
  out.entries = first.entries;
  double inv = 1.0 / static_cast<double>(ckpts.size());
  for (size_t i = 0; i < out.entries.size(); ++i) {
    auto& data = out.entries[i].data;
    for (size_t j = 0; j < data.size(); ++j) {
      double acc = 0.0;
      for (const auto& c : ckpts) acc += c.entries[i].data[j];
      data[j] = static_cast<float>(acc * inv);
    }
  }
  return out;
}

}  // namespace told::nn
