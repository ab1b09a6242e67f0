// Copyright 2026 The cnkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace cnkit {

// Base of every error thrown by the library. Callers that only care about
// "something went wrong in cnkit" catch this one.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input: a bad row, an out-of-range field, an unknown label.
class ValidationError : public Error {
 public:
  ValidationError(std::string field, const std::string& what)
      : Error(what), field_(std::move(field)) {}
  explicit ValidationError(const std::string& what) : Error(what) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

// A well-formed request that violates a cross-record rule.
class ConstraintError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Remote endpoint failures (toxicity service, LM bridge).
class TransportError : public Error {
 public:
  TransportError(int status, const std::string& what) : Error(what), status_(status) {}
  int status() const noexcept { return status_; }

 private:
  int status_;
};

// Wire-level violations: malformed frames, version mismatch.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

}  // namespace cnkit
