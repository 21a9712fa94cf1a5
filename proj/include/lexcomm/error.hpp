// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace lexcomm {

enum class ErrorKind {
  config,
  stage_dependency,
  gateway,
  fabrication,
  validation,
  io,
};

/// Process exit code reported by the command line tool for each error kind.
constexpr int exit_code(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::config: return 2;
    case ErrorKind::stage_dependency: return 3;
    case ErrorKind::gateway: return 4;
    case ErrorKind::fabrication: return 5;
    case ErrorKind::validation: return 6;
    case ErrorKind::io: return 7;
  }
  return 1;
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorKind::config, what) {}
};

class StageDependencyError : public Error {
 public:
  StageDependencyError(std::string stage, const std::string& what)
      : Error(ErrorKind::stage_dependency, what), stage_(std::move(stage)) {}
  /// The predecessor stage that must be (re-)run.
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

class GatewayError : public Error {
 public:
  GatewayError(bool retriable, const std::string& what)
      : Error(ErrorKind::gateway, what), retriable_(retriable) {}
  bool retriable() const noexcept { return retriable_; }

 private:
  bool retriable_;
};

class FabricationError : public Error {
 public:
  FabricationError(std::string token, const std::string& what)
      : Error(ErrorKind::fabrication, what), token_(std::move(token)) {}
  /// The offending citation token as it appeared in the model output.
  const std::string& token() const noexcept { return token_; }

 private:
  std::string token_;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what) : Error(ErrorKind::validation, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorKind::io, what) {}
};

}  // namespace lexcomm
