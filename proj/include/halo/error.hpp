#pragma once

#include <stdexcept>
#include <string>

namespace halo {

// Every failure raised by the library derives from Error. The three
// categories map one-to-one onto the CLI exit codes (1, 2, 3).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad arguments or malformed invocation.
class UsageError : public Error {
 public:
  using Error::Error;
};

// Input data could not be parsed or is statistically degenerate.
class DataError : public Error {
 public:
  using Error::Error;
};

// Weights, config or forward-pass failures.
class ModelError : public Error {
 public:
  using Error::Error;
};

}  // namespace halo
