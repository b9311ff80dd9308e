#pragma once

#include <stdexcept>
#include <string>

namespace agmon {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// bad input: exit code 2 at the CLI
class ConfigError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class NotPSD : public Error {
 public:
  using Error::Error;
};

class Degenerate : public Error {
 public:
  using Error::Error;
};

class EllipticityViolation : public Error {
 public:
  using Error::Error;
};

class SingularSample : public Error {
 public:
  using Error::Error;
};

class InsufficientSamples : public Error {
 public:
  using Error::Error;
};

// numerical failures: exit code 3 at the CLI
class NumericalFailure : public Error {
 public:
  using Error::Error;
};

class NoConvergence : public NumericalFailure {
 public:
  using NumericalFailure::NumericalFailure;
};

class BracketFailure : public NumericalFailure {
 public:
  using NumericalFailure::NumericalFailure;
};

class QuadratureNonConvergence : public NumericalFailure {
 public:
  using NumericalFailure::NumericalFailure;
};

}  // namespace agmon
