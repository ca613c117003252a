#pragma once

#include <stdexcept>
#include <string>

namespace finsler {

// Base of every error thrown by the library. The CLI maps InputError (and
// subclasses) to exit status 2 and everything else to exit status 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or non-finite arguments, mismatched sampling grids.
class InputError : public Error {
 public:
  using Error::Error;
};

// Metric spec file problems; the message lists every offending field path.
class SchemaError : public InputError {
 public:
  using InputError::InputError;
};

// Point outside the chart domain (or outside a reachable region).
class DomainError : public InputError {
 public:
  using InputError::InputError;
};

// Singular operation inside an expression (log/sqrt of a nonpositive value,
// division by zero). Carries the offending subexpression in the message.
class EvaluationError : public Error {
 public:
  using Error::Error;
};

// Fundamental tensor not positive definite above the configured floor.
class DegeneracyError : public Error {
 public:
  using Error::Error;
};

// ODE step-size collapse or step budget exhausted.
class IntegrationError : public Error {
 public:
  using Error::Error;
};

// Shooting solver did not converge.
class BvpError : public Error {
 public:
  BvpError(const std::string& what, double residual) : Error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

// Quadrature did not reach the requested relative accuracy.
class AccuracyError : public Error {
 public:
  using Error::Error;
};

// Internal cross-check failed (e.g. g_v R not symmetric).
class ConsistencyError : public Error {
 public:
  using Error::Error;
};

// A sampler skipped too many of its samples.
class SamplingError : public Error {
 public:
  using Error::Error;
};

}  // namespace finsler
