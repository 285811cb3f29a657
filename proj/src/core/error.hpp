#pragma once

#include <stdexcept>
#include <string>

namespace aste {

// Errors are grouped by the exit class they map to at the C boundary.
enum class ErrorKind { kUsage = 1, kData = 2, kRuntime = 3 };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& w) : Error(ErrorKind::kUsage, w) {}
};

class ParseError : public Error {
 public:
  ParseError(const std::string& w, int line = 0)
      : Error(ErrorKind::kData,
              line > 0 ? "line " + std::to_string(line) + ": " + w : w),
        line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

class RangeError : public Error {
 public:
  explicit RangeError(const std::string& w) : Error(ErrorKind::kData, w) {}
};

class AlignmentError : public Error {
 public:
  explicit AlignmentError(const std::string& w) : Error(ErrorKind::kData, w) {}
};

class GraphError : public Error {
 public:
  explicit GraphError(const std::string& w) : Error(ErrorKind::kData, w) {}
};

class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& w) : Error(ErrorKind::kRuntime, w) {}
};

class InitError : public Error {
 public:
  explicit InitError(const std::string& w) : Error(ErrorKind::kRuntime, w) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& w) : Error(ErrorKind::kData, w) {}
};

}  // namespace aste
