#pragma once

#include <stdexcept>
#include <string>

namespace gkan {

// Base for every error the library raises. Subclasses map one-to-one onto the
// failure categories callers are expected to distinguish.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class UsageError : public Error {
 public:
  using Error::Error;
};

class EvaluationError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class DegenerateFeatureError : public Error {
 public:
  using Error::Error;
};

class DegenerateDegreeError : public Error {
 public:
  using Error::Error;
};

class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& path, std::size_t line, const std::string& what)
      : Error(path + ":" + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class CompatibilityError : public Error {
 public:
  using Error::Error;
};

}  // namespace gkan
