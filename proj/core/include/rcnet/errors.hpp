#pragma once

#include <stdexcept>
#include <string>

namespace rcnet {

// Raised when caller-supplied arguments violate a documented precondition.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// Raised when a computation cannot meet its accuracy contract at runtime
// (overflow, non-finite intermediate, or a certified safety margin too small).
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace rcnet
