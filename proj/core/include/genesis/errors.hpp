#pragma once

#include <stdexcept>
#include <string>

namespace genesis {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent on-disk dataset, or an impossible scene.
class DatasetError : public Error {
 public:
  using Error::Error;
};

/// Tensor shape does not match the configured network geometry.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A quantity that must be finite (posterior parameter, KL term, loss) is not.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class CheckpointError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace genesis
