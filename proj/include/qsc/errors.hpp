#pragma once

#include <stdexcept>
#include <string>

namespace qsc {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A metric operator or Hessian-type matrix failed its definiteness requirement.
class NotPositiveDefinite : public Error {
 public:
  using Error::Error;
};

/// H + beta*B could not be factorized, even after the jitter ladder.
class SingularSystem : public Error {
 public:
  using Error::Error;
};

class MaxInnerIterations : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, int line)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

  int line() const noexcept { return line_; }

 private:
  int line_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ParameterError : public Error {
 public:
  using Error::Error;
};

}  // namespace qsc
