// Copyright 2026 SeqUDA-Rec authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "sequda/params.hpp"

namespace sequda {

// Checkpoint directory: manifest.json (format version, tensor names /
// shapes / dtype, config echo, vocab digest) + params.bin (tensors
// concatenated in manifest order, little-endian float32, row-major).
struct CheckpointMeta {
  int format_version = 1;
  std::string config_json;    // canonical RunConfig echo
  std::string config_digest;  // SHA-256 of config_json
  std::string vocab_digest;
};

void save_checkpoint(const std::string& dir, const ParamRegistry& reg,
                     const CheckpointMeta& meta);

// Loads params into an already-built registry; names and shapes must
// match the manifest exactly.
CheckpointMeta load_checkpoint(const std::string& dir, ParamRegistry& reg);

CheckpointMeta read_checkpoint_meta(const std::string& dir);

// Round every registered value to float32 precision in place (the value
// a save/load round trip would produce).
void round_to_f32(ParamRegistry& reg);

}  // namespace sequda
