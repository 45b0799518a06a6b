#pragma once

#include <stdexcept>
#include <string>

namespace dgua {

// Base class for every error thrown by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor/layer shape disagreements. Messages name both shapes.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Math domain violations (log of non-positive input, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

// Non-finite values where finite ones are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

// API contract violations: bad preconditions, missing gradients, stale tapes.
class ContractError : public Error {
 public:
  using Error::Error;
};

// Two networks that were expected to be architectural twins are not.
class ArchitectureError : public Error {
 public:
  using Error::Error;
};

// Inconsistent protocol definitions or empty splits.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

// Malformed input files (CSV rows, checkpoint containers).
class ParseError : public Error {
 public:
  using Error::Error;
};

// Structurally valid input with the wrong schema (column counts, names).
class SchemaError : public Error {
 public:
  using Error::Error;
};

// Experiment config failed validation against the published schema.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Metric is undefined for the given inputs (e.g. single-class AUC).
class MetricError : public Error {
 public:
  using Error::Error;
};

// A loss term went non-finite or past the abort threshold during training.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

// Filesystem failures while writing artifacts.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace dgua
