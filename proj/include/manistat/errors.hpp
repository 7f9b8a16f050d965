#pragma once

#include <stdexcept>
#include <string>

namespace manistat {

// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Invalid argument values: non-tangent inputs, non-positive-definite bases,
// mismatched descriptors, parameters outside their admissible range.
class DomainError : public Error {
 public:
  using Error::Error;
};

// The target point lies in (or numerically at) the cut locus of the base
// point, so the inverse exponential is undefined.
class CutLocusError : public Error {
 public:
  using Error::Error;
};

// The requested operation is not defined for this manifold.
class UnsupportedError : public Error {
 public:
  using Error::Error;
};

// Bad or incomplete configuration (missing normalizing factor, unknown
// experiment keys, empty seed lists).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// A computation failed numerically (non-finite values, failed envelopes,
// non-Hurwitz spectra, no bisection bracket).
class NumericalError : public Error {
 public:
  using Error::Error;
};

// Evaluation outside the range covered by an interpolation table.
class ExtrapolationError : public Error {
 public:
  using Error::Error;
};

}  // namespace manistat
