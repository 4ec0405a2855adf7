// Copyright 2026 SeqUDA-Rec authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace sequda {

// Error taxonomy maps 1:1 onto CLI exit codes (see sequda.h).
struct SchemaError : std::runtime_error {
  explicit SchemaError(const std::string& msg) : std::runtime_error(msg) {}
};

struct IoError : std::runtime_error {
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DivergenceError : std::runtime_error {
  explicit DivergenceError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DigestMismatchError : std::runtime_error {
  explicit DigestMismatchError(const std::string& msg) : std::runtime_error(msg) {}
};

struct UnknownUserError : std::runtime_error {
  explicit UnknownUserError(const std::string& msg) : std::runtime_error(msg) {}
};

struct GradCheckError : std::runtime_error {
  explicit GradCheckError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NoRunsError : std::runtime_error {
  explicit NoRunsError(const std::string& msg) : std::runtime_error(msg) {}
};

struct WorkdirLockedError : std::runtime_error {
  explicit WorkdirLockedError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace sequda
