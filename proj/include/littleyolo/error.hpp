#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace littleyolo {

// Base class for every failure raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor or layer shapes that violate a kernel's contract.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Malformed network description. Carries the 1-based source line (0 when
// the problem is not tied to a line).
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Malformed binary or image payloads (weights, PPM, annotation files).
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace littleyolo
