// Copyright 2026 The qvit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace qvit {

/// Caller supplied something invalid (bad shapes, bad config, bad labels).
/// The CLI maps this family to exit code 1.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DimensionError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class ConfigError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Runtime failures (I/O, malformed files, numerical blow-ups). Exit code 2.
class RuntimeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericError : public RuntimeError {
 public:
  using RuntimeError::RuntimeError;
};

class IoError : public RuntimeError {
 public:
  using RuntimeError::RuntimeError;
};

class SchemaError : public RuntimeError {
 public:
  using RuntimeError::RuntimeError;
};

class ParseError : public RuntimeError {
 public:
  ParseError(const std::string& what, std::uint64_t offset)
      : RuntimeError(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}

  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

}  // namespace qvit
