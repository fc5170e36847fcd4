#pragma once

#include <stdexcept>
#include <string>

namespace phs {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Invalid user input: malformed spaces, plans, configs.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Reading or writing persisted trial data failed.
class StorageError : public Error {
 public:
  using Error::Error;
};

}  // namespace phs
