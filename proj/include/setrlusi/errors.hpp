#pragma once

#include <stdexcept>
#include <string>

namespace setrlusi {

// Base for every error raised by the library. Callers that only care about
// "something went wrong in setrlusi" can catch this one.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shapes disagree (rows vs centers, labels vs samples, ...).
class DimensionError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf, empty inputs, non-binary labels and similar data problems.
class DataError : public Error {
 public:
  using Error::Error;
};

// Linear system could not be solved even after jitter escalation.
class SingularSystemError : public Error {
 public:
  using Error::Error;
};

// A weak learner fit was not possible (degenerate b denominator, ...).
class FitError : public Error {
 public:
  using Error::Error;
};

// Resampling could not produce a usable draw.
class SamplingError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Ensemble training produced nothing usable.
class TrainingError : public Error {
 public:
  using Error::Error;
};

}  // namespace setrlusi
