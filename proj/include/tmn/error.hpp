#pragma once

#include <stdexcept>
#include <string>

namespace tmn {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Incompatible tensor shapes; the message names the primitive.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Non-finite value entered or left a computation.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// A caller broke an operation's precondition.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Malformed file or inconsistent on-disk data.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration value or combination.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Object or attribute id outside the vocabulary.
class VocabularyError : public Error {
 public:
  using Error::Error;
};

/// Evaluation protocol cannot be applied to the given matrix.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

}  // namespace tmn
