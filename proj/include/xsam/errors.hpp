#pragma once

#include <stdexcept>
#include <string>

namespace xsam {

// Base for every error raised by the library. The CLI maps subclasses onto
// exit codes (config 2, numeric 3, verification 4).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class DimensionTooLarge : public Error {
 public:
  using Error::Error;
};

class DegenerateGradient : public Error {
 public:
  explicit DegenerateGradient(std::size_t step)
      : Error("gradient norm below 1e-12 at ascent step " + std::to_string(step)), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

class DegenerateFrame : public Error {
 public:
  using Error::Error;
};

class ProbeFailure : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class VerificationFailure : public Error {
 public:
  using Error::Error;
};

}  // namespace xsam
