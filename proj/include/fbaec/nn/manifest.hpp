// Copyright 2026 The fbaec Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef FBAEC_NN_MANIFEST_HPP_
#define FBAEC_NN_MANIFEST_HPP_

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "fbaec/common.hpp"
#include "fbaec/nn/tensor.hpp"

namespace fbaec::nn {

// Weight manifest binary format (version 1):
//   bytes 0..3   magic "FBWM"
//   bytes 4..7   header length H, uint32 little-endian
//   bytes 8..8+H UTF-8 JSON header: format_version, model, config_hash,
//                tensors: [{name, shape, offset}], blob_bytes
//   rest         one contiguous little-endian float32 blob
// Offsets are byte offsets into the blob. Every graph parameter must resolve
// to exactly one entry with a matching shape.
struct WeightManifest {
  struct Entry {
    std::string name;
    std::vector<int> shape;
    uint64_t offset = 0;  // bytes into blob
  };

  int format_version = 1;
  std::string model;
  std::string config_hash;
  std::vector<Entry> entries;
  std::vector<float> blob;

  size_t total_params() const { return blob.size(); }
};

inline constexpr char kManifestMagic[4] = {'F', 'B', 'W', 'M'};
inline constexpr int kManifestVersion = 1;

inline void save_manifest(const std::string& path, const ParamMap& params,
                          const std::string& model,
                          const std::string& config_hash) {
  nlohmann::json header;
  header["format_version"] = kManifestVersion;
  header["model"] = model;
  header["config_hash"] = config_hash;

  std::vector<float> blob;
  nlohmann::json tensors = nlohmann::json::array();
  for (const auto& [name, p] : params) {
    nlohmann::json t;
    t["name"] = name;
    t["shape"] = p->shape;
    t["offset"] = static_cast<uint64_t>(blob.size() * sizeof(float));
    tensors.push_back(t);
    blob.insert(blob.end(), p->v.begin(), p->v.end());
  }
  header["tensors"] = tensors;
  header["blob_bytes"] = static_cast<uint64_t>(blob.size() * sizeof(float));

  const std::string hj = header.dump();
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("save_manifest: cannot open " + path);
  f.write(kManifestMagic, 4);
  const uint32_t hl = static_cast<uint32_t>(hj.size());
  char hl_le[4] = {static_cast<char>(hl & 0xff),
                   static_cast<char>((hl >> 8) & 0xff),
                   static_cast<char>((hl >> 16) & 0xff),
                   static_cast<char>((hl >> 24) & 0xff)};
  f.write(hl_le, 4);
  f.write(hj.data(), static_cast<std::streamsize>(hj.size()));
  for (float x : blob) {
    uint32_t u;
    std::memcpy(&u, &x, 4);
    char b[4] = {static_cast<char>(u & 0xff),
                 static_cast<char>((u >> 8) & 0xff),
                 static_cast<char>((u >> 16) & 0xff),
                 static_cast<char>((u >> 24) & 0xff)};
    f.write(b, 4);
  }
  if (!f) throw DataError("save_manifest: write failed for " + path);
}

inline WeightManifest load_manifest(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("load_manifest: cannot open " + path);
  std::vector<unsigned char> raw((std::istreambuf_iterator<char>(f)),
                                 std::istreambuf_iterator<char>());
  if (raw.size() < 8 || std::memcmp(raw.data(), kManifestMagic, 4) != 0)
    throw DataError("load_manifest: bad magic in " + path);
  const uint32_t hl = static_cast<uint32_t>(raw[4]) |
                      (static_cast<uint32_t>(raw[5]) << 8) |
                      (static_cast<uint32_t>(raw[6]) << 16) |
                      (static_cast<uint32_t>(raw[7]) << 24);
  if (8 + static_cast<size_t>(hl) > raw.size())
    throw DataError("load_manifest: truncated header in " + path);

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(raw.begin() + 8, raw.begin() + 8 + hl);
  } catch (const std::exception& e) {
    throw DataError(std::string("load_manifest: header parse error: ") +
                    e.what());
  }
  WeightManifest m;
  m.format_version = header.value("format_version", -1);
  if (m.format_version != kManifestVersion)
    throw DataError("load_manifest: unsupported format version " +
                    std::to_string(m.format_version) + " (expected " +
                    std::to_string(kManifestVersion) + ")");
  m.model = header.value("model", "");
  m.config_hash = header.value("config_hash", "");
  for (const auto& t : header.at("tensors")) {
    WeightManifest::Entry e;
    e.name = t.at("name").get<std::string>();
    e.shape = t.at("shape").get<std::vector<int>>();
    e.offset = t.at("offset").get<uint64_t>();
    m.entries.push_back(std::move(e));
  }

  const size_t blob_off = 8 + hl;
  const size_t blob_bytes = raw.size() - blob_off;
  if (blob_bytes % 4 != 0)
    throw DataError("load_manifest: blob size not a multiple of 4 in " + path);
  m.blob.resize(blob_bytes / 4);
  for (size_t i = 0; i < m.blob.size(); ++i) {
    const unsigned char* p = raw.data() + blob_off + 4 * i;
    const uint32_t u = static_cast<uint32_t>(p[0]) |
                       (static_cast<uint32_t>(p[1]) << 8) |
                       (static_cast<uint32_t>(p[2]) << 16) |
                       (static_cast<uint32_t>(p[3]) << 24);
    std::memcpy(&m.blob[i], &u, 4);
  }
  return m;
}

// Copies manifest tensors into the graph parameters. Fails with one message
// listing every missing name, every shape mismatch, and (unless
// allow_unused) every manifest entry the graph does not want.
inline void bind_manifest(const ParamMap& params, const WeightManifest& m,
                          bool allow_unused = false) {
  std::map<std::string, const WeightManifest::Entry*> index;
  for (const auto& e : m.entries) {
    if (index.count(e.name))
      throw DataError("bind_manifest: duplicate tensor '" + e.name + "'");
    index[e.name] = &e;
  }

  std::string missing, mismatched;
  for (const auto& [name, p] : params) {
    auto it = index.find(name);
    if (it == index.end()) {
      missing += (missing.empty() ? "" : ", ") + name;
      continue;
    }
    if (it->second->shape != p->shape) {
      mismatched += (mismatched.empty() ? "" : ", ") + name;
      continue;
    }
  }
  if (!missing.empty())
    throw DataError("bind_manifest: missing tensors: " + missing);
  if (!mismatched.empty())
    throw DataError("bind_manifest: shape mismatch for: " + mismatched);

  if (!allow_unused) {
    std::string unused;
    for (const auto& e : m.entries) {
      bool wanted = false;
      for (const auto& [name, p] : params)
        if (name == e.name) wanted = true;
      if (!wanted) unused += (unused.empty() ? "" : ", ") + e.name;
    }
    if (!unused.empty())
      throw DataError("bind_manifest: unused tensors: " + unused);
  }

  for (const auto& [name, p] : params) {
    const auto& e = *index.at(name);
    const size_t off = e.offset / 4;
    if (off + p->size() > m.blob.size())
      throw DataError("bind_manifest: blob overrun for '" + name + "'");
    std::copy(m.blob.begin() + static_cast<long>(off),
              m.blob.begin() + static_cast<long>(off + p->size()),
              p->v.begin());
  }
}

}  // namespace fbaec::nn

#endif  // FBAEC_NN_MANIFEST_HPP_
