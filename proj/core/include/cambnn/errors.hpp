#pragma once

#include <stdexcept>
#include <string>

namespace cambnn {

// Base class for every error thrown by this library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Row or bit index outside the device geometry.
class IndexError : public Error {
 public:
  using Error::Error;
};

// Dimension mismatch between two objects that must agree (query vs row
// width, input vector vs layer fan-in, image count vs label count).
class ShapeError : public Error {
 public:
  using Error::Error;
};

// A search or read touched a row that was never written.
class UninitializedRowError : public Error {
 public:
  using Error::Error;
};

// Malformed knob profile file, or a lookup against an empty profile.
class ProfileError : public Error {
 public:
  using Error::Error;
};

// Requested tolerance cannot be realized by any legal knob setting.
class CalibrationError : public Error {
 public:
  using Error::Error;
};

// NaN or other non-finite value where a real number is required.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Batch norm scale of exactly zero cannot be folded into a threshold.
class DegenerateBnError : public Error {
 public:
  using Error::Error;
};

// Model does not fit the device geometry under the given options.
class CapacityError : public Error {
 public:
  using Error::Error;
};

// Malformed or truncated file (dataset, model, image).
class FormatError : public Error {
 public:
  using Error::Error;
};

// Invalid runtime input (empty dataset, out-of-range voltage, bad option).
class InputError : public Error {
 public:
  using Error::Error;
};

}  // namespace cambnn
