#pragma once

#include <stdexcept>
#include <string>

namespace limex {

/// Bad user input: malformed files, out-of-range parameters, shape mismatches.
class InvalidInput : public std::runtime_error {
 public:
  explicit InvalidInput(const std::string& what) : std::runtime_error(what) {}
};

/// Numerical failure: singular systems, overflow, non-finite results.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

/// A linear system whose factorization hit a vanishing pivot. `column` is the
/// offending column of the intercept-augmented design: 0 is the intercept,
/// j >= 1 is superpixel j.
class SingularSystem : public NumericError {
 public:
  SingularSystem(const std::string& what, int column)
      : NumericError(what), column_(column) {}
  int column() const { return column_; }

 private:
  int column_;
};

}  // namespace limex
