// Copyright 2026 The SFR Authors
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

#ifndef SFR_ERROR_HPP
#define SFR_ERROR_HPP

#include <stdexcept>
#include <string>
#include <string_view>

namespace sfr {

enum class ErrorKind {
  NotSquare,
  Asymmetric,
  JitterExhausted,
  DimensionMismatch,
  InvalidTarget,
  NonFiniteLoss,
  MTooLarge,
  NTooLarge,
  ParseError,
  MissingColumn,
  EmptyFile,
  MissingFile,
  BadFractions,
  InvalidConfig,
  InvalidArgument,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NotSquare: return "NotSquare";
    case ErrorKind::Asymmetric: return "Asymmetric";
    case ErrorKind::JitterExhausted: return "JitterExhausted";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::InvalidTarget: return "InvalidTarget";
    case ErrorKind::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorKind::MTooLarge: return "MTooLarge";
    case ErrorKind::NTooLarge: return "NTooLarge";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::MissingColumn: return "MissingColumn";
    case ErrorKind::EmptyFile: return "EmptyFile";
    case ErrorKind::MissingFile: return "MissingFile";
    case ErrorKind::BadFractions: return "BadFractions";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

/// True for failures of the numerics (as opposed to bad input or configuration).
inline bool is_numeric(ErrorKind kind) {
  return kind == ErrorKind::JitterExhausted || kind == ErrorKind::NonFiniteLoss ||
         kind == ErrorKind::NotSquare || kind == ErrorKind::Asymmetric;
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// ParseError with the offending location. Row 0 is the header line, columns are 0-based.
class ParseError : public Error {
 public:
  ParseError(std::size_t row, std::size_t col, const std::string& what)
      : Error(ErrorKind::ParseError,
              "row " + std::to_string(row) + ", col " + std::to_string(col) + ": " + what),
        row_(row),
        col_(col) {}

  std::size_t row() const noexcept { return row_; }
  std::size_t col() const noexcept { return col_; }

 private:
  std::size_t row_;
  std::size_t col_;
};

inline void require(bool condition, ErrorKind kind, const std::string& what) {
  if (!condition) throw Error(kind, what);
}

}  // namespace sfr

#endif  // SFR_ERROR_HPP
