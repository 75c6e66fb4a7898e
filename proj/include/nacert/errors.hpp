#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace nacert {

// An expression node received an argument outside its domain (sqrt of a
// negative, division by zero, derivative at a cusp, ...).
class DomainError : public std::domain_error {
 public:
  DomainError(std::string node, double value, const std::string& what)
      : std::domain_error(what + " at node '" + node + "' (argument " + std::to_string(value) + ")"),
        node_(std::move(node)),
        value_(value) {}

  const std::string& node() const noexcept { return node_; }
  double value() const noexcept { return value_; }

 private:
  std::string node_;
  double value_;
};

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line = 0, std::size_t column = 0)
      : std::runtime_error(format(what, line, column)), line_(line), column_(column) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  static std::string format(const std::string& what, std::size_t line, std::size_t column) {
    if (line == 0 && column == 0) return what;
    return what + " (line " + std::to_string(line) + ", column " + std::to_string(column) + ")";
  }

  std::size_t line_;
  std::size_t column_;
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// No certified linearization could be produced on the requested box.
class EnclosureUnavailable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Second derivatives could not be bounded on the requested box.
class NotTwiceDifferentiable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace nacert
