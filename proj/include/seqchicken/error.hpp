#pragma once

#include <stdexcept>
#include <string>

namespace seqchicken {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad arguments or configuration values.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A state or index outside the configured bounds.
class OutOfRangeError : public Error {
 public:
  using Error::Error;
};

class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

class DegenerateTrackError : public Error {
 public:
  using Error::Error;
};

/// Every candidate of a likelihood scan failed to evaluate.
class FitFailure : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

}  // namespace seqchicken
