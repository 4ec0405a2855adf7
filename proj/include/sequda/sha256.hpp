// Copyright 2026 SeqUDA-Rec authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace sequda {

// Self-contained SHA-256 (FIPS 180-4). Used for dataset / config / vocab
// digests embedded in output artifacts; keeps the shared library free of
// a crypto dependency.
std::string sha256_hex(std::string_view data);
std::string sha256_file_hex(const std::string& path);

}  // namespace sequda
