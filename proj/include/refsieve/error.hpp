// Copyright 2026 The Refsieve Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace refsieve {

// Base for everything thrown on purpose. exit_code 1 marks rejected input
// (config, file contents, shapes); exit_code 2 marks a failure at run time.
class Error : public std::runtime_error {
 public:
  Error(const std::string& message, int exit_code)
      : std::runtime_error(message), exit_code_(exit_code) {}
  int exit_code() const { return exit_code_; }

 private:
  int exit_code_;
};

// Tensor dimensions do not line up. Messages name both shapes.
class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& m) : Error(m, 1) {}
};

// An operation was called outside its mathematical domain.
class DomainError : public Error {
 public:
  explicit DomainError(const std::string& m) : Error(m, 1) {}
};

// A file could not be parsed. Messages carry the line number where known.
class ParseError : public Error {
 public:
  explicit ParseError(const std::string& m) : Error(m, 1) {}
};

// Parsed data violates a schema invariant. Messages name field and instance.
class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& m) : Error(m, 1) {}
};

// A run configuration is malformed or out of range.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& m) : Error(m, 1) {}
};

// A stored artifact is internally inconsistent (truncated, wrong blob size).
class IntegrityError : public Error {
 public:
  explicit IntegrityError(const std::string& m) : Error(m, 1) {}
};

// A stored artifact declares a format version this build does not read.
class VersionError : public Error {
 public:
  explicit VersionError(const std::string& m) : Error(m, 1) {}
};

// Training or another long-running stage failed mid-flight.
class TrainingError : public Error {
 public:
  explicit TrainingError(const std::string& m) : Error(m, 2) {}
};

// Filesystem and other environment failures.
class IoError : public Error {
 public:
  explicit IoError(const std::string& m) : Error(m, 2) {}
};

}  // namespace refsieve
