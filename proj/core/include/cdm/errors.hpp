#ifndef CDM_ERRORS_HPP_
#define CDM_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace cdm {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid parameters, or incompatible components (e.g. a threshold table
/// calibrated for another bin count).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed data: non-finite values, dimension mismatches, unknown labels.
class InputError : public Error {
 public:
  using Error::Error;
};

/// File could not be opened, read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

/// File was readable but its content is not a valid record.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Monte Carlo calibration could not reach the requested accuracy.
class CalibrationError : public Error {
 public:
  using Error::Error;
};

/// Linear algebra failure (singular or non positive definite matrices).
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace cdm

#endif  // CDM_ERRORS_HPP_
