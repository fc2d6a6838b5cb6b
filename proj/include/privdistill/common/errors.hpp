#pragma once

#include <stdexcept>
#include <string>

namespace privdistill {

// Context window overflow.
class LengthError : public std::length_error {
 public:
  using std::length_error::length_error;
};

// Token id outside the vocabulary, or a value outside an operation's domain.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Mismatched per-token vector lengths.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// NaN/inf where a finite value is required.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Inputs that fail a documented precondition (e.g. unnormalized distributions).
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Filtering left no probability mass to sample from.
class SamplerError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The pretrained base failed the task's structural thresholds.
class TaskConstructionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace privdistill
