#pragma once

#include <stdexcept>
#include <string>

namespace sme {

// Base class for all pipeline errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid filter specification (edge >= Nyquist, non-increasing edges, ...).
class DesignError : public Error {
 public:
  using Error::Error;
};

// Signal shorter than the padding required for zero-phase filtering.
class SignalTooShort : public Error {
 public:
  using Error::Error;
};

// Sampling rate not divisible by the decimation factor.
class ResampleError : public Error {
 public:
  using Error::Error;
};

// Event too close to a recording boundary to cut a full epoch.
class EpochOutOfBounds : public Error {
 public:
  using Error::Error;
};

// A required class (remembered/forgotten) is absent or underpopulated.
class MissingCondition : public Error {
 public:
  using Error::Error;
};

// A trial carries no signal energy; its covariance is undefined.
class DegenerateTrial : public Error {
 public:
  using Error::Error;
};

// Covariance not positive definite where the solver requires it.
class SingularCovariance : public Error {
 public:
  using Error::Error;
};

// Dimension mismatch between data and model.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Eval-mode forward requested before batch-norm statistics exist.
class UninitializedStats : public Error {
 public:
  using Error::Error;
};

// Fewer trials than cross-validation folds.
class TooFewTrials : public Error {
 public:
  using Error::Error;
};

// On-disk container fails its length or consistency checks.
class CorruptContainer : public Error {
 public:
  using Error::Error;
};

// Container version not understood by this build.
class VersionError : public Error {
 public:
  using Error::Error;
};

// Invalid synthetic-data specification.
class SpecError : public Error {
 public:
  using Error::Error;
};

}  // namespace sme
