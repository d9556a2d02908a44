#pragma once

#include <stdexcept>
#include <string>

namespace srnam {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor or image has the wrong shape, channel count or resolution.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Argument outside its documented domain (negative weight, alpha > 1, ...).
class ValueError : public Error {
 public:
  using Error::Error;
};

/// Manifest, PNG or dataset content is malformed.
class DatasetError : public Error {
 public:
  using Error::Error;
};

/// Checkpoint missing, unreadable or incompatible with the requested model.
class CheckpointError : public Error {
 public:
  using Error::Error;
};

/// A training or inversion loss became non-finite.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace srnam
