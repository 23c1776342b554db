#pragma once

#include <stdexcept>
#include <string>

namespace pixmix {

// File could not be opened, read, or written. Message carries the path.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

// File opened fine but its contents are not a valid encoding (bad PNG, bad JSON).
class DecodeError : public std::runtime_error {
 public:
  explicit DecodeError(const std::string& what) : std::runtime_error(what) {}
};

// Well-formed input that violates a documented schema invariant
// (missing label, non-contiguous frame indices, probabilities off by more
// than tolerance, ...).
class SchemaError : public std::runtime_error {
 public:
  explicit SchemaError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace pixmix
