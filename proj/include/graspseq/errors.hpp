#pragma once

#include <stdexcept>
#include <string>

namespace graspseq {

// Root of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input file. `line` is 1-based, 0 when not line-oriented.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : Error(line ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Data violates a documented invariant (weights, indices, tree shape, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Geometric precondition failed: empty mesh, open mesh, degenerate configuration.
class GeometryError : public Error {
 public:
  using Error::Error;
};

// Missing or inconsistent configuration (absent normals, bad parameters, missing files).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Non-finite objective, failed solve, budget exhausted.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace graspseq
