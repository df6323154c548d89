#pragma once

#include <stdexcept>
#include <string>

namespace datapricer {

// Thrown when dense linear algebra cannot proceed: singular or rank-deficient
// matrices, degenerate query directions, non-positive variances.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

// Thrown for malformed configs, files, and schema violations.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace datapricer
