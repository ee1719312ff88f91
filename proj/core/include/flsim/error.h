/*
 * Copyright 2026 The flsim Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef FLSIM_ERROR_H_
#define FLSIM_ERROR_H_

#include <stdexcept>
#include <string>

namespace flsim {

// Root of every exception thrown by the library. Subclasses identify the
// failure category so callers (the CLI in particular) can map them to exit
// codes without parsing messages.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid or inconsistent configuration, detected before any work runs.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Argument outside an operation's mathematical domain.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Vector or matrix dimensions that do not fit the architecture.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Malformed input file; the message carries row/column location.
class ParseError : public Error {
 public:
  using Error::Error;
};

// Messages that violate the aggregation protocol (wrong key, length
// mismatch, unexpected client).
class ProtocolError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf in training or aggregation.
class NumericError : public Error {
 public:
  using Error::Error;
};

class DecryptionError : public Error {
 public:
  using Error::Error;
};

// Real value cannot be represented by the fixed-point codec.
class EncodingError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace flsim

#endif  // FLSIM_ERROR_H_
