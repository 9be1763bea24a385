#pragma once

#include <stdexcept>
#include <string>

namespace lttd {

// Shape or extent mismatch between operands.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Non-finite value, zero norm, or other numerical breakdown.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Coordinates outside an image or tensor extent.
class RangeError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

// Input data does not satisfy a precondition (e.g. video too short).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid enum value, level, or configuration field.
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Metric undefined for the given input (e.g. single-class AUC).
class MetricError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Checkpoint, manifest, or image file could not be read or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace lttd
