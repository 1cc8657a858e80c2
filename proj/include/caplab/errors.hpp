// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace caplab {

/// Two values that must live in the same fact space do not.
class DomainMismatchError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A requested exact enumeration exceeds the configured cap.
class EnumerationTooLargeError : public std::length_error {
 public:
  using std::length_error::length_error;
};

/// The judge response text did not contain exactly one parseable object.
class MalformedResponseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A parseable judge response violated the expected key/value schema.
class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace caplab
