#ifndef METAGCD_ERRORS_HPP
#define METAGCD_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace metagcd {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not fit the operation.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Input is mathematically degenerate for the operation (zero-norm row, zero weight, ...).
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

/// Misuse of a computation graph (non-scalar root, double backward).
class GraphError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration or precondition violation detected before work starts.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Not enough classes or samples for the requested split.
class CapacityError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class FormatError : public IoError {
 public:
  using IoError::IoError;
};

class VersionMismatchError : public FormatError {
 public:
  using FormatError::FormatError;
};

class MalformedHeaderError : public FormatError {
 public:
  using FormatError::FormatError;
};

class TruncatedDataError : public FormatError {
 public:
  using FormatError::FormatError;
};

}  // namespace metagcd

#endif  // METAGCD_ERRORS_HPP
