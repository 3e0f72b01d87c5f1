#pragma once

#include <stdexcept>
#include <string>

namespace ragcap {

inline constexpr const char* kEngineVersion = "0.1.0";

// Bad or inconsistent inputs and artifacts: dimension mismatches, empty
// stores, corrupt files. Maps to CLI exit code 3.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numeric breakdown during computation (NaN loss, degenerate statistics).
// Maps to CLI exit code 4.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace ragcap
