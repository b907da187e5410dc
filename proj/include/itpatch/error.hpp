// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace itpatch {

// Base of every error the library raises. Callers that only need a message
// can catch std::runtime_error.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A documented precondition was not met (wrong color space, bad sizes, ...).
class ContractViolation : public Error {
 public:
  using Error::Error;
};

class DecodeError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class NoRegionFound : public Error {
 public:
  using Error::Error;
};

class ShapeOutsideRegion : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Oracle failures. Each protocol failure mode has its own type so callers
// can tell a slow server from a broken one.
class OracleError : public Error {
 public:
  using Error::Error;
};

class BackendUnavailable : public OracleError {
 public:
  using OracleError::OracleError;
};

class OracleTimeout : public OracleError {
 public:
  using OracleError::OracleError;
};

class MalformedResponse : public OracleError {
 public:
  using OracleError::OracleError;
};

class IdMismatch : public OracleError {
 public:
  using OracleError::OracleError;
};

class ValidationError : public OracleError {
 public:
  using OracleError::OracleError;
};

class RemoteError : public OracleError {
 public:
  using OracleError::OracleError;
};

}  // namespace itpatch
