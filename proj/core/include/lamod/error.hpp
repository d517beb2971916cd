#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace lamod {

// Base for every error raised by the library. Callers that do not care about
// the category can catch this one type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operands live on different grids or have incompatible field extents.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Tensor shapes do not satisfy an operation's contract.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Non-finite values appeared during an iterative computation.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

// API misuse: invalid argument ranges, missing state, wrong call order.
class UsageError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Malformed binary container. `offset()` is the byte position at which
// parsing failed.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::uint64_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"), detail_(what), offset_(offset) {}

  std::uint64_t offset() const noexcept { return offset_; }
  // The message without the offset suffix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  std::string detail_;
  std::uint64_t offset_;
};

}  // namespace lamod
