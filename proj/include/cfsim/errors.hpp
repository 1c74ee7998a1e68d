#pragma once

#include <stdexcept>
#include <string>

namespace cfsim {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// -- geometry --------------------------------------------------------------

/// Point lies behind (or on) the camera plane during projection.
class NonPositiveDepth : public Error {
public:
  using Error::Error;
};

/// Landmark cloud covariance is rank-deficient; no stable principal frame.
class DegenerateCloud : public Error {
public:
  using Error::Error;
};

// -- population ------------------------------------------------------------

/// Malformed dataset row or field.
class SchemaError : public Error {
public:
  using Error::Error;
};

/// Landmark name not found in the registry.
class UnknownLandmark : public Error {
public:
  using Error::Error;
};

/// Invalid generator or experiment specification.
class InvalidSpec : public Error {
public:
  using Error::Error;
};

/// Filtering removed every subject.
class EmptyResult : public Error {
public:
  using Error::Error;
};

/// A requested landmark has fewer than the minimum present samples.
class InsufficientSamples : public Error {
public:
  using Error::Error;
};

// -- fstt ------------------------------------------------------------------

/// Mean-mode prediction requested without population statistics.
class MissingStats : public Error {
public:
  using Error::Error;
};

/// A landmark required for prediction is absent from the subject.
class MissingLandmark : public Error {
public:
  using Error::Error;
};

// -- photo-sim -------------------------------------------------------------

/// Fewer than the minimum visible landmarks for a renderable photo.
class TooFewVisible : public Error {
public:
  using Error::Error;
};

// -- sfo-solver ------------------------------------------------------------

/// Model points (near-)collinear; pose initialization is not well defined.
class DegenerateConfiguration : public Error {
public:
  using Error::Error;
};

/// Non-finite cost or Jacobian encountered while solving.
class NumericalFailure : public Error {
public:
  using Error::Error;
};

// -- harness / cli ---------------------------------------------------------

/// Metrics requested over an empty ranking list.
class EmptyRankings : public Error {
public:
  using Error::Error;
};

/// Experiment or CLI configuration fails validation.
class ConfigError : public Error {
public:
  using Error::Error;
};

/// I/O failure (missing file, unwritable path, corrupt content).
class IoError : public Error {
public:
  using Error::Error;
};

}  // namespace cfsim
