#pragma once

#include <stdexcept>
#include <string>

namespace pertlab {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input text (model files, configs).
class ParseError : public Error {
 public:
  ParseError(const std::string& source, int line, const std::string& what);
  int line() const noexcept { return line_; }

 private:
  int line_;
};

/// A value violates a documented type invariant. `field()` names the offender.
class InvariantError : public Error {
 public:
  InvariantError(std::string field, const std::string& what);
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Caller-side configuration problem (infeasible sizes, bad parameter blocks).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A mathematical guard refused the input: point outside the physical domain,
/// time past the shock estimate, non-strict hyperbolicity, ...
class DomainError : public Error {
 public:
  DomainError(std::string guard, const std::string& what);
  const std::string& guard() const noexcept { return guard_; }

 private:
  std::string guard_;
};

/// An iterative method failed or a numerical cross-check disagreed.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// The rate-synthesis linear program admits only the zero model.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

}  // namespace pertlab
