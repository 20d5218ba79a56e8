// Copyright 2026 The fqsim Authors
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

#pragma once

#include <stdexcept>
#include <string>

namespace fqsim {

/// Base class for every error thrown by the library.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Register/digit/matrix shapes that do not line up.
class DimensionError : public Error {
  public:
    using Error::Error;
};

/// A documented precondition was violated by the caller.
class ContractViolation : public Error {
  public:
    using Error::Error;
};

/// Amplitude found outside the legal sector of an encoding.
class EncoderBug : public Error {
  public:
    using Error::Error;
};

/// Requested parameters exceed the desk-scale caps.
class InfeasibleParams : public Error {
  public:
    using Error::Error;
};

/// Malformed configuration. `where` carries a line number or field path.
class ConfigError : public Error {
  public:
    ConfigError(const std::string &where, const std::string &what)
        : Error(where.empty() ? what : where + ": " + what), where_(where) {}
    [[nodiscard]] const std::string &where() const { return where_; }

  private:
    std::string where_;
};

namespace detail {
inline void require(bool cond, const char *msg) {
    if (!cond) {
        throw ContractViolation(msg);
    }
}
} // namespace detail

} // namespace fqsim
