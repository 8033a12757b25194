#pragma once

#include <stdexcept>
#include <string>

namespace cqed {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad user input: dimensions, indices, malformed parameters.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class InvalidDimension : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

/// A mathematical precondition of a closed-form expression fails
/// (vanishing denominator, no root in bracket, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

class SingularDetuning : public DomainError {
 public:
  using DomainError::DomainError;
};

class DegenerateTransformation : public DomainError {
 public:
  using DomainError::DomainError;
};

class NoIdlePoint : public DomainError {
 public:
  using DomainError::DomainError;
};

class NoGate : public DomainError {
 public:
  using DomainError::DomainError;
};

class UnsupportedFrame : public DomainError {
 public:
  using DomainError::DomainError;
};

class InsufficientData : public DomainError {
 public:
  using DomainError::DomainError;
};

class NoData : public DomainError {
 public:
  using DomainError::DomainError;
};

/// A numerical contract was violated at run time (Hermiticity, norm, unitarity).
class ContractViolation : public Error {
 public:
  using Error::Error;
};

/// Integrator norm drift exceeded its bound; the step must be reduced.
class StepSizeError : public ContractViolation {
 public:
  using ContractViolation::ContractViolation;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace cqed
