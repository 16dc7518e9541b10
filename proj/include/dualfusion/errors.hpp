#pragma once

#include <stdexcept>
#include <string>

namespace dualfusion {

// File-format problems: bad syntax, unknown fields, wrong types.
struct ParseError : std::runtime_error {
  explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

// Well-formed input that breaks a data contract (duplicate ids, unknown
// class names, dimension mismatches between files).
struct ValidationError : std::runtime_error {
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite loss or parameters encountered during fusion training.
struct DivergenceError : std::runtime_error {
  explicit DivergenceError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace dualfusion
