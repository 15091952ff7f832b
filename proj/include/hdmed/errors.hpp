#pragma once

#include <stdexcept>
#include <string>

namespace hdmed {

// Base class for all errors raised by the library.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid inputs: dimension mismatches, non-finite values, bad parameters.
class ValidationError : public Error {
public:
  explicit ValidationError(const std::string& msg) : Error(msg) {}
};

// Rank-deficient or ill-conditioned design/moment matrices.
class SingularError : public Error {
public:
  explicit SingularError(const std::string& msg) : Error(msg) {}
};

// Fit cannot support the requested inference (e.g. n <= s + q).
class DegenerateFitError : public Error {
public:
  explicit DegenerateFitError(const std::string& msg) : Error(msg) {}
};

}  // namespace hdmed
