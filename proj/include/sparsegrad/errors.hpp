// Copyright 2026 The sparsegrad Authors
//
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

#ifndef SPARSEGRAD_ERRORS_HPP_
#define SPARSEGRAD_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace sparsegrad {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Precondition violation on an argument (bad dimension, nonpositive step...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// The objective returned a non-finite value or its child process failed.
class EvaluationFailed : public Error {
 public:
  using Error::Error;
};

/// Homotopy path needed more breakpoints than allowed.
class MaxStepsExceeded : public Error {
 public:
  using Error::Error;
};

/// Active-set Gram matrix is numerically singular.
class DegenerateStep : public Error {
 public:
  using Error::Error;
};

/// Gradient recovery failed; wraps the underlying solver error message.
class RecoveryFailed : public Error {
 public:
  using Error::Error;
};

class NotSymmetric : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

/// Malformed or inconsistent experiment / command-line configuration.
class ConfigError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

}  // namespace sparsegrad

#endif  // SPARSEGRAD_ERRORS_HPP_
