#pragma once

#include <stdexcept>
#include <string>

namespace layercard {

// Shared error taxonomy. Every failure thrown by the library derives from
// Error, so callers can catch the whole library or a specific condition.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InvalidMatrix : Error {
  using Error::Error;
};

struct DimensionMismatch : Error {
  using Error::Error;
};

struct PartitionMismatch : Error {
  using Error::Error;
};

struct NotPositiveDefinite : Error {
  using Error::Error;
};

struct CouplingTooStrong : Error {
  using Error::Error;
};

struct EmptySelection : Error {
  using Error::Error;
};

struct InvalidArgument : Error {
  using Error::Error;
};

struct DegenerateActivation : Error {
  using Error::Error;
};

struct DivergedTraining : Error {
  using Error::Error;
};

struct UndefinedCorrelation : Error {
  using Error::Error;
};

struct CalibrationUnderdetermined : Error {
  using Error::Error;
};

struct SchemaMismatch : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

}  // namespace layercard
