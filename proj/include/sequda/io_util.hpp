// Copyright 2026 SeqUDA-Rec authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

namespace sequda {

std::string read_file(const std::string& path);

// Write-to-temp + atomic rename, so failed commands never leave partial
// output files behind.
void atomic_write_file(const std::string& path, const std::string& content);

void ensure_dir(const std::string& dir);

}  // namespace sequda
