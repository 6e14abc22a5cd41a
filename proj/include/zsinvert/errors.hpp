// Copyright 2026 The zsinvert Authors.
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

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace zsinvert {

// Base of every error this library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid numeric input: zero-norm vectors, dimension mismatch, NaN.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Bad flags, inconsistent encoder dimensions, unusable presets.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// An endpoint does not offer a feature the search relies on (logprobs).
class CapabilityError : public Error {
 public:
  using Error::Error;
};

// Transport or protocol failure talking to a model endpoint, after retries.
class BackendError : public Error {
 public:
  explicit BackendError(const std::string& what,
                        std::optional<std::size_t> batch_index = std::nullopt)
      : Error(batch_index ? what + " (batch " + std::to_string(*batch_index) + ")"
                          : what),
        batch_index_(batch_index) {}

  std::optional<std::size_t> batch_index() const { return batch_index_; }

 private:
  std::optional<std::size_t> batch_index_;
};

}  // namespace zsinvert
