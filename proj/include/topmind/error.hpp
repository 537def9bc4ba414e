#pragma once

#include <stdexcept>
#include <string>

namespace topmind {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad flags, bad configuration, or a missing input file. Maps to exit code 2.
class UsageError : public Error {
 public:
  using Error::Error;
};

}  // namespace topmind
