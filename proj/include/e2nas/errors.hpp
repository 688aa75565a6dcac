// Copyright 2026 The e2nas Authors
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace e2nas {

// Base of every error raised by the library. The CLI maps subclasses onto
// its exit codes, so new kinds must derive from one of the families below.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& field, const std::string& what)
      : Error("parse error in '" + field + "': " + what), field_(field) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class NumericDomainError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class InvalidStateError : public Error {
 public:
  using Error::Error;
};

class InsufficientData : public Error {
 public:
  using Error::Error;
};

// Binary container problems: bad magic, version, truncation.
class FormatError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// --- evaluator family -------------------------------------------------------

class EvaluatorError : public Error {
 public:
  using Error::Error;
};

class SpawnError : public EvaluatorError {
 public:
  using EvaluatorError::EvaluatorError;
};

class ConnectError : public EvaluatorError {
 public:
  using EvaluatorError::EvaluatorError;
};

class HandshakeError : public EvaluatorError {
 public:
  using EvaluatorError::EvaluatorError;
};

class ProtocolError : public EvaluatorError {
 public:
  using EvaluatorError::EvaluatorError;
};

class TimeoutError : public EvaluatorError {
 public:
  using EvaluatorError::EvaluatorError;
};

class ConnectionLost : public EvaluatorError {
 public:
  using EvaluatorError::EvaluatorError;
};

// The evaluator answered with an error reply.
class RemoteError : public EvaluatorError {
 public:
  using EvaluatorError::EvaluatorError;
};

}  // namespace e2nas
