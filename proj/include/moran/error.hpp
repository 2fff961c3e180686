#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace moran {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed sequence description, out-of-range index or bad argument.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A computation needs more levels than the tables or structure carry.
class DepthError : public Error {
 public:
  DepthError(const std::string& what, std::size_t required_depth)
      : Error(what), required_depth_(required_depth) {}

  /// Depth that would have been sufficient (0 if not known).
  std::size_t required_depth() const noexcept { return required_depth_; }

 private:
  std::size_t required_depth_;
};

/// A geometric realization cannot be built as requested.
class ConstructionError : public Error {
 public:
  using Error::Error;
};

/// The interval budget of a realization would be exceeded.
class ResourceError : public Error {
 public:
  using Error::Error;
};

/// A file could not be read, parsed or written.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace moran
