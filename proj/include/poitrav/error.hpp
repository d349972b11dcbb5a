#pragma once

#include <stdexcept>
#include <string>

namespace poitrav {

/// Bad or inconsistent configuration (CLI exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Missing, malformed or invalid input data (CLI exit code 3).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Degenerate data for a numerical routine, e.g. an index that is
/// undefined for fewer than two clusters (CLI exit code 4).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace poitrav
