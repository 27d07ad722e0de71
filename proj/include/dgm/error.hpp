#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dgm {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shape/size mismatches and empty inputs.
struct DimensionError : Error {
  using Error::Error;
};

// Non-finite values or numerically undefined results.
struct NumericError : Error {
  using Error::Error;
};

// Arguments outside their documented domain.
struct RangeError : Error {
  using Error::Error;
};

// Loss evaluated over an empty pixel set.
struct UndefinedLossError : Error {
  using Error::Error;
};

// Invalid run configuration or command usage.
struct ConfigError : Error {
  using Error::Error;
};

// File I/O and format failures; carries the offending byte offset when known.
struct IoError : Error {
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  explicit IoError(const std::string& msg, std::size_t offset = npos)
      : Error(offset == npos ? msg : msg + " (byte " + std::to_string(offset) + ")"),
        byte_offset(offset) {}

  std::size_t byte_offset;
};

}  // namespace dgm
