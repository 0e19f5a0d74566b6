// Copyright 2026 The tubeseq Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace tubeseq {

/// Bad caller input: out-of-range coordinates, mismatched shapes, bad flags.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed serialized data or a representation invariant that does not hold.
class FormatError : public std::runtime_error {
 public:
  FormatError(std::string kind, const std::string& detail)
      : std::runtime_error(kind + ": " + detail), kind_(std::move(kind)) {}

  /// Short machine-readable violation tag, e.g. "bad-magic" or "overlap".
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

/// A tensor operation produced NaN or Inf.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The operation is not available in the object's current configuration.
class InvalidState : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace tubeseq
