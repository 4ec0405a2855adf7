// Copyright 2026 SeqUDA-Rec authors
// SPDX-License-Identifier: Apache-2.0
#include "sequda/checkpoint.hpp"

#include <cstring>

#include "json.hpp"
#include "sequda/errors.hpp"
#include "sequda/io_util.hpp"
#include "sequda/sha256.hpp"

using nlohmann::json;

namespace sequda {

void save_checkpoint(const std::string& dir, const ParamRegistry& reg,
                     const CheckpointMeta& meta) {
  ensure_dir(dir);
  json manifest;
  manifest["format_version"] = meta.format_version;
  manifest["dtype"] = "float32";
  manifest["config"] = meta.config_json.empty() ? json::object()
                                                : json::parse(meta.config_json);
  manifest["config_digest"] = meta.config_digest;
  manifest["vocab_sha256"] = meta.vocab_digest;
  json tensors = json::array();
  std::string blob;
  for (const auto& e : reg.entries()) {
    json t;
    t["name"] = e.name;
    t["shape"] = e.shape;
    tensors.push_back(std::move(t));
    for (std::size_t i = 0; i < e.n; ++i) {
      const float f = static_cast<float>(e.value[i]);
      char buf[4];
      std::memcpy(buf, &f, 4);
      blob.append(buf, 4);
    }
  }
  manifest["tensors"] = std::move(tensors);
  atomic_write_file(dir + "/manifest.json", manifest.dump() + "\n");
  atomic_write_file(dir + "/params.bin", blob);
}

CheckpointMeta read_checkpoint_meta(const std::string& dir) {
  const json manifest = json::parse(read_file(dir + "/manifest.json"));
  CheckpointMeta meta;
  meta.format_version = manifest.at("format_version").get<int>();
  if (meta.format_version != 1)
    throw SchemaError("checkpoint: unsupported format_version " +
                      std::to_string(meta.format_version));
  meta.config_json = manifest.at("config").dump();
  meta.config_digest = manifest.value("config_digest", "");
  meta.vocab_digest = manifest.value("vocab_sha256", "");
  return meta;
}

CheckpointMeta load_checkpoint(const std::string& dir, ParamRegistry& reg) {
  const json manifest = json::parse(read_file(dir + "/manifest.json"));
  const CheckpointMeta meta = read_checkpoint_meta(dir);
  const auto& tensors = manifest.at("tensors");
  const auto& entries = reg.entries();
  if (tensors.size() != entries.size())
    throw SchemaError("checkpoint: tensor count mismatch");
  const std::string blob = read_file(dir + "/params.bin");
  std::size_t off = 0;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    if (tensors[i].at("name").get<std::string>() != e.name)
      throw SchemaError("checkpoint: tensor name mismatch at index " + std::to_string(i) +
                        ": expected " + e.name);
    if (tensors[i].at("shape").get<std::vector<std::size_t>>() != e.shape)
      throw SchemaError("checkpoint: shape mismatch for tensor " + e.name);
    if (off + 4 * e.n > blob.size()) throw SchemaError("checkpoint: params.bin truncated");
    for (std::size_t j = 0; j < e.n; ++j) {
      float f;
      std::memcpy(&f, blob.data() + off, 4);
      e.value[j] = static_cast<double>(f);
      off += 4;
    }
  }
  if (off != blob.size()) throw SchemaError("checkpoint: params.bin has trailing bytes");
  return meta;
}

void round_to_f32(ParamRegistry& reg) {
  for (const auto& e : reg.entries())
    for (std::size_t i = 0; i < e.n; ++i)
      e.value[i] = static_cast<double>(static_cast<float>(e.value[i]));
}

}  // namespace sequda
