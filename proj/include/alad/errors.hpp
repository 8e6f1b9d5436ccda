#pragma once

#include <stdexcept>
#include <string>

namespace alad {

// Error taxonomy shared by the whole toolkit. The CLI maps these to exit
// codes: ConfigError -> 2, DataError -> 3, NumericError -> 4.
struct ArgumentError : std::invalid_argument {
  explicit ArgumentError(const std::string& msg) : std::invalid_argument(msg) {}
};

struct ShapeError : ArgumentError {
  explicit ShapeError(const std::string& msg) : ArgumentError(msg) {}
};

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// Misuse of a stateful object (nested EMA swap, training under swap, ...).
struct UsageError : std::logic_error {
  explicit UsageError(const std::string& msg) : std::logic_error(msg) {}
};

}  // namespace alad
