#pragma once

#include <stdexcept>
#include <string>

namespace embridge {

/// Base class for all errors raised by this library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Mismatched image/array dimensions.
class ShapeError : public Error {
public:
  using Error::Error;
};

/// A value or record violates a documented precondition.
class ValidationError : public Error {
public:
  using Error::Error;
};

/// A kinematic description is malformed (cycles, multiple roots, ...).
class StructureError : public Error {
public:
  using Error::Error;
};

/// Input uses a feature outside the supported subset; names the feature.
class UnsupportedFeatureError : public Error {
public:
  using Error::Error;
};

/// A scalar argument is outside its admissible interval.
class RangeError : public Error {
public:
  using Error::Error;
};

/// Input is geometrically degenerate (coincident points, zero norm, ...).
class DegeneracyError : public Error {
public:
  using Error::Error;
};

/// A configuration value is invalid; names the field.
class ConfigError : public Error {
public:
  using Error::Error;
};

/// File could not be read, written, or parsed.
class IoError : public Error {
public:
  using Error::Error;
};

} // namespace embridge
