#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mreal {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed dataset/config/stats input. Carries the 1-based line number when known.
class IngestError : public Error {
 public:
  IngestError(const std::string& what, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Raised when a loss or gradient becomes non-finite during training.
class TrainingError : public Error {
 public:
  using Error::Error;
};

}  // namespace mreal
