#pragma once

#include <stdexcept>
#include <string>

namespace iclpara {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad user input: unreadable files, schema violations, invalid configs.
class InputError : public Error {
 public:
  using Error::Error;
};

// The model produced nothing usable (empty after cleaning, demo_copy without demos).
class GenerationFailure : public Error {
 public:
  using Error::Error;
};

// Transport failures, exhausted retries, malformed responses.
class BackendError : public Error {
 public:
  using Error::Error;
};

// Missing or rejected credentials.
class AuthError : public Error {
 public:
  using Error::Error;
};

// Too many failed generations in one run; partial results were persisted.
class RunAborted : public Error {
 public:
  using Error::Error;
};

}  // namespace iclpara
