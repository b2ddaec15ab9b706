/*
 *  Copyright 2026 The EIM Authors
 *
 *  Licensed under the Apache License, Version 2.0 (the "License");
 *  you may not use this file except in compliance with the License.
 *  You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 *  Unless required by applicable law or agreed to in writing, software
 *  distributed under the License is distributed on an "AS IS" BASIS,
 *  WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 *  See the License for the specific language governing permissions and
 *  limitations under the License.
 */

#pragma once

#include <stdexcept>
#include <string>

namespace eim {

enum class ErrorKind {
  kInput,
  kDomain,
  kNumerical,
  kTraining,
  kConfig,
  kIo,
  kUnsupported,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Shape or width mismatch, invalid counts.
struct InputError : Error {
  explicit InputError(const std::string& what) : Error(ErrorKind::kInput, what) {}
};

// Arguments outside the mathematical domain (support violations, non-PD covariances).
struct DomainError : Error {
  explicit DomainError(const std::string& what) : Error(ErrorKind::kDomain, what) {}
};

struct NumericalError : Error {
  explicit NumericalError(const std::string& what) : Error(ErrorKind::kNumerical, what) {}
};

struct TrainingError : Error {
  TrainingError(const std::string& what, int epoch)
      : Error(ErrorKind::kTraining, what + " (epoch " + std::to_string(epoch) + ")"), epoch(epoch) {}
  int epoch;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& what) : Error(ErrorKind::kConfig, what) {}
};

struct IoError : Error {
  explicit IoError(const std::string& what) : Error(ErrorKind::kIo, what) {}
};

struct UnsupportedError : Error {
  explicit UnsupportedError(const std::string& what) : Error(ErrorKind::kUnsupported, what) {}
};

}  // namespace eim
